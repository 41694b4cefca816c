#pragma once

#include "gendice/common.hpp"
#include "gendice/dataset.hpp"
#include "gendice/divergences.hpp"
#include "gendice/markov.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace gendice {

struct ExactSolveOptions {
    double shift = 1e-8;         ///< inverse-iteration shift for gamma = 1
    double tol = 1e-12;          ///< L1 change between normalized inverse iterates
    double residual_tol = 1e-10; ///< also accept once |P^T y - rho y|_1 is this small
    int max_iter = 200;
    double support_tol = 1e-12;  ///< stationary mass below this counts as zero
};

namespace detail {

/// Row-substochastic operator on a subset of units (transitions leaving the subset dropped).
struct SubChain {
    std::vector<std::size_t> units;  ///< global unit index of each local state
    SparseRowMat P;                  ///< local transition weights
    Vec init;                        ///< local initial mass (may sum to < 1)
    Vec p;                           ///< local data weights p(x) > 0
};

using SparseLUSolver = Eigen::SparseLU<Eigen::SparseMatrix<double>>;

/// Factors diag I - gamma P^T into `lu`.
inline void factor_shifted(SparseLUSolver& lu, const SparseRowMat& P, double diag, double gamma) {
    const auto n = P.rows();
    Eigen::SparseMatrix<double> A(n, n);
    A.setIdentity();
    A *= diag;
    A -= gamma * Eigen::SparseMatrix<double>(P.transpose());
    A.makeCompressed();
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw Error("exact solve: factorization failed");
}

/// Dominant left eigenvector of a non-negative operator by shifted inverse iteration on
/// I - P^T, started from `start`. Returns a non-negative vector with unit mass.
/// `apply_t` computes P^T y. When the dominant eigenvalue is repeated (several closed
/// classes) the iterates stall at round-off level inside the eigenspace, so a small
/// eigen-residual also counts as converged.
template <class Solve, class ApplyT>
Vec inverse_iteration(Solve&& solve, ApplyT&& apply_t, const Vec& start, const ExactSolveOptions& opt) {
    Vec y = start / start.sum();
    double change = 0.0;
    for (int k = 0; k < opt.max_iter; ++k) {
        Vec next = solve(y);
        for (auto& v : next) v = std::max(v, 0.0);
        const double s = next.sum();
        if (!(s > 0.0) || !std::isfinite(s)) throw Error("exact solve: inverse iteration collapsed");
        next /= s;
        change = (next - y).lpNorm<1>();
        y = std::move(next);
        if (change <= opt.tol) return y;
        const Vec py = apply_t(y);
        if ((py - py.sum() * y).lpNorm<1>() <= opt.residual_tol) return y;
    }
    throw ConvergenceError("exact solve: inverse iteration did not converge in " + std::to_string(opt.max_iter) +
                               " iterations",
                           change);
}

/// Stationary weights w on the sub-chain: w = (1-g) init + g P^T w for g < 1, the Perron
/// vector of P^T for g = 1. Clamped at zero and normalized to unit mass.
inline Vec solve_subchain(const SubChain& sc, double gamma, const ExactSolveOptions& opt) {
    Vec w;
    if (gamma < 1.0) {
        SparseLUSolver lu;
        factor_shifted(lu, sc.P, 1.0, gamma);
        w = lu.solve(Vec((1.0 - gamma) * sc.init));
        for (auto& v : w) v = std::max(v, 0.0);
        require(w.sum() > 0.0, "exact solve: initial distribution has no mass on the data support");
        return w / w.sum();
    }
    SparseLUSolver lu;
    factor_shifted(lu, sc.P, 1.0 + opt.shift, 1.0);
    return inverse_iteration([&](const Vec& y) -> Vec { return lu.solve(y); },
                             [&](const Vec& y) -> Vec { return sc.P.transpose() * y; }, sc.p, opt);
}

inline std::vector<double> ratio_from_weights(const SubChain& sc, const Vec& w, std::size_t n_units) {
    std::vector<double> tau(n_units, 0.0);
    for (std::size_t i = 0; i < sc.units.size(); ++i)
        tau[sc.units[i]] = w[static_cast<Eigen::Index>(i)] / sc.p[static_cast<Eigen::Index>(i)];
    return tau;
}

/// Builds the local operator from (source, destination, weight) flows over global units,
/// keeping only sources and destinations with positive data weight.
inline SubChain make_subchain(const std::vector<double>& p, const std::vector<Triplet>& flows,
                              const std::vector<double>& init) {
    SubChain sc;
    std::vector<long> local(p.size(), -1);
    for (std::size_t x = 0; x < p.size(); ++x)
        if (p[x] > 0.0) {
            local[x] = static_cast<long>(sc.units.size());
            sc.units.push_back(x);
        }
    require(!sc.units.empty(), "exact solve: data distribution is empty");
    const auto k = static_cast<Eigen::Index>(sc.units.size());
    std::vector<Triplet> t;
    t.reserve(flows.size());
    for (const auto& f : flows) {
        const auto a = local[static_cast<std::size_t>(f.row())], b = local[static_cast<std::size_t>(f.col())];
        if (a >= 0 && b >= 0) t.emplace_back(static_cast<int>(a), static_cast<int>(b), f.value());
    }
    sc.P.resize(k, k);
    sc.P.setFromTriplets(t.begin(), t.end());
    sc.init = Vec::Zero(k);
    sc.p = Vec::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        sc.init[i] = init[sc.units[static_cast<std::size_t>(i)]];
        sc.p[i] = p[sc.units[static_cast<std::size_t>(i)]];
    }
    return sc;
}

}  // namespace detail

/// Exact ratio tau = mu / p for a known chain: mu solves mu = (1-g) mu0 + g P^T mu (the
/// nullspace of I - P^T with sum(mu) = 1 when g = 1), and p must cover the support of mu.
inline std::vector<double> tabular_exact_solve(const MarkovChain& chain, const Distribution& p, double gamma,
                                               const Distribution& mu0_term, const ExactSolveOptions& opt = {}) {
    const auto n = chain.n_states();
    detail::require(p.size() == n && mu0_term.size() == n, "tabular_exact_solve: dimension mismatch");
    detail::require(gamma >= 0.0 && gamma <= 1.0, "tabular_exact_solve: gamma must lie in [0, 1]");
    Vec mu;
    if (gamma == 0.0) {
        mu = mu0_term.vec();
    } else if (gamma < 1.0) {
        mu = detail::discounted_solve(chain, gamma, (1.0 - gamma) * mu0_term.vec());
    } else {
        // (1 + s) I - P^T = (1 + s) (I - P^T / (1 + s))
        const double g = 1.0 / (1.0 + opt.shift);
        mu = detail::inverse_iteration(
            [&](const Vec& y) -> Vec { return detail::discounted_solve(chain, g, Vec(g * y)); },
            [&](const Vec& y) -> Vec { return chain.transpose_apply(y); }, p.vec(), opt);
    }
    for (auto& v : mu) v = std::max(v, 0.0);
    mu /= mu.sum();
    std::vector<std::size_t> missing;
    for (std::size_t x = 0; x < n; ++x)
        if (p[x] == 0.0 && mu[static_cast<Eigen::Index>(x)] > opt.support_tol) missing.push_back(x);
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + std::to_string(missing[i]);
        if (missing.size() > 20) list += ", ...";
        throw InvalidArgument("tabular_exact_solve: p is zero on " + std::to_string(missing.size()) +
                              " states carrying stationary mass: " + list);
    }
    std::vector<double> tau(n, 0.0);
    for (std::size_t x = 0; x < n; ++x)
        if (p[x] > 0.0) tau[x] = mu[static_cast<Eigen::Index>(x)] / p[x];
    return tau;
}

/// Chain overload using the chain's own discount and initial distribution.
inline std::vector<double> tabular_exact_solve(const MarkovChain& chain, const Distribution& p,
                                               const ExactSolveOptions& opt = {}) {
    return tabular_exact_solve(chain, p, chain.gamma(), chain.mu0(), opt);
}

/// Exact minimizer of the empirical objective over tabular tau on state-action units:
/// the data supply p-hat, the flow (1/N) sum_i pi(a'|s'_i) 1[(s_i,a_i) -> (s'_i,a')] and the
/// initial term mu0-hat x pi. Flow into units outside the data support is dropped, so the
/// system is solved in the least-violating (Perron) sense and renormalized to sum p tau = 1.
inline std::vector<double> empirical_exact_solve(const TransitionDataset& data, const Policy& target, double gamma,
                                                 const ExactSolveOptions& opt = {}) {
    detail::require(!data.empty(), "empirical_exact_solve: dataset is empty");
    detail::require(target.n_states() == data.n_states() && target.n_actions() == data.n_actions(),
                    "empirical_exact_solve: policy shape does not match the dataset");
    const auto nA = data.n_actions();
    const auto p = data.empirical_unit_distribution();
    std::vector<Triplet> flows;
    flows.reserve(data.size() * nA);
    for (const auto& r : data.records()) {
        const auto x = static_cast<int>(data.unit(r));
        const double inv = 1.0 / static_cast<double>(data.unit_counts()[static_cast<std::size_t>(x)]);
        for (std::size_t a = 0; a < nA; ++a)
            if (target(r.next_state, a) > 0.0)
                flows.emplace_back(x, static_cast<int>(r.next_state * nA + a), inv * target(r.next_state, a));
    }
    std::vector<double> init(data.n_units(), 0.0);
    if (gamma < 1.0) {
        const auto mu0 = data.empirical_initial_distribution();
        for (std::size_t s = 0; s < data.n_states(); ++s)
            for (std::size_t a = 0; a < nA; ++a) init[s * nA + a] = mu0[s] * target(s, a);
    }
    const auto sc = detail::make_subchain(p, flows, init);
    return detail::ratio_from_weights(sc, detail::solve_subchain(sc, gamma, opt), data.n_units());
}

/// Behavior-cloned policy ratio w(s,a) = pi(a|s) / (count(s,a) / count(s)), zero on
/// state-action pairs absent from the data.
inline std::vector<double> cloned_policy_ratio(const TransitionDataset& data, const Policy& target) {
    std::vector<double> state_count(data.n_states(), 0.0);
    for (const auto& r : data.records()) state_count[r.state] += 1.0;
    std::vector<double> w(data.n_units(), 0.0);
    for (std::size_t x = 0; x < w.size(); ++x)
        if (data.unit_counts()[x] > 0) {
            const auto s = x / data.n_actions(), a = x % data.n_actions();
            w[x] = target(s, a) * state_count[s] / static_cast<double>(data.unit_counts()[x]);
        }
    return w;
}

/// State-level variant: tau(s) solves the same system over states with every record
/// reweighted by the cloned policy ratio; the returned table is the state-action ratio
/// tau(s) w(s,a) so it plugs into estimate_policy_value unchanged.
inline std::vector<double> empirical_exact_solve_cloned(const TransitionDataset& data, const Policy& target,
                                                        double gamma, const ExactSolveOptions& opt = {}) {
    detail::require(!data.empty(), "empirical_exact_solve_cloned: dataset is empty");
    const auto nA = data.n_actions();
    const auto w = cloned_policy_ratio(data, target);
    const auto p = data.empirical_state_distribution();
    std::vector<double> state_count(data.n_states(), 0.0);
    for (const auto& r : data.records()) state_count[r.state] += 1.0;
    std::vector<Triplet> flows;
    flows.reserve(data.size());
    for (const auto& r : data.records()) {
        const double wi = w[data.unit(r)];
        if (wi > 0.0)
            flows.emplace_back(static_cast<int>(r.state), static_cast<int>(r.next_state), wi / state_count[r.state]);
    }
    std::vector<double> init(data.n_states(), 0.0);
    if (gamma < 1.0) init = data.empirical_initial_distribution();
    const auto sc = detail::make_subchain(p, flows, init);
    const auto tau_s = detail::ratio_from_weights(sc, detail::solve_subchain(sc, gamma, opt), data.n_states());
    std::vector<double> tau(data.n_units(), 0.0);
    for (std::size_t x = 0; x < tau.size(); ++x) tau[x] = tau_s[x / nA] * w[x];
    return tau;
}

/// T o (p tau) = (1-g) mu0 + g P^T (p tau).
inline Vec transported_weights(const MarkovChain& chain, const std::vector<double>& p, const std::vector<double>& tau,
                               double gamma, const Distribution& mu0_term) {
    const auto n = chain.n_states();
    detail::require(p.size() == n && tau.size() == n && mu0_term.size() == n, "dimension mismatch");
    Vec w(static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < n; ++x) w[static_cast<Eigen::Index>(x)] = p[x] * tau[x];
    if (gamma == 0.0) return mu0_term.vec();
    return (1.0 - gamma) * mu0_term.vec() + gamma * chain.transpose_apply(w);
}

/// Primal objective D_phi(T o (p tau) || p tau) + lambda/2 (sum p tau - 1)^2, i.e. the saddle
/// objective after exact maximization over f and u.
inline double exact_objective(const FDivergence& div, const MarkovChain& chain, const std::vector<double>& p,
                              const std::vector<double>& tau, double gamma, const Distribution& mu0_term,
                              double lambda) {
    const Vec q = transported_weights(chain, p, tau, gamma, mu0_term);
    std::vector<double> base(p.size());
    double mass = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) {
        base[x] = p[x] * tau[x];
        mass += base[x];
    }
    return eval_divergence(div, detail::to_std(q), base) + 0.5 * lambda * (mass - 1.0) * (mass - 1.0);
}

/// Population saddle objective with exact expectations:
/// (1-g) <mu0, f> + g <p tau, P f> - <p tau, phi*(f)> + lambda (u (<p, tau> - 1) - u^2/2).
inline double saddle_objective_full(const FDivergence& div, const MarkovChain& chain, const std::vector<double>& p,
                                    const std::vector<double>& tau, const std::vector<double>& f, double u,
                                    double gamma, const Distribution& mu0_term, double lambda) {
    const auto n = chain.n_states();
    detail::require(p.size() == n && tau.size() == n && f.size() == n, "dimension mismatch");
    const Vec fv = detail::to_vec(f);
    const Vec Pf = chain.apply(fv);
    double j = (1.0 - gamma) * mu0_term.vec().dot(fv), mass = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        const double w = p[x] * tau[x];
        if (w == 0.0) continue;
        j += gamma * w * Pf[static_cast<Eigen::Index>(x)] - w * div.conjugate(f[x]);
        mass += w;
    }
    return j + lambda * (u * (mass - 1.0) - u * u / 2.0);
}

struct InnerMax {
    std::vector<double> f;
    double u = 0.0;
};

/// Closed-form maximizers of the chi-square saddle objective for fixed tau:
/// f*(x) = 2 (q(x) / (p tau)(x) - 1) with q = T o (p tau), u* = sum p tau - 1.
/// Units with p tau = 0 get f = 0.
inline InnerMax inner_max_chi2(const MarkovChain& chain, const std::vector<double>& p, const std::vector<double>& tau,
                               double gamma, const Distribution& mu0_term) {
    const Vec q = transported_weights(chain, p, tau, gamma, mu0_term);
    InnerMax m;
    m.f.assign(p.size(), 0.0);
    double mass = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) {
        const double w = p[x] * tau[x];
        mass += w;
        if (w > 0.0) m.f[x] = chi_squared().closed_form_dual(q[static_cast<Eigen::Index>(x)] / w);
    }
    m.u = mass - 1.0;
    return m;
}

/// max over (f, u) of the chi-square saddle objective, evaluated through the closed-form
/// inner maximizers. Infinite when T o (p tau) has mass where p tau has none.
inline double profile_objective_chi2(const MarkovChain& chain, const std::vector<double>& p,
                                     const std::vector<double>& tau, double gamma, const Distribution& mu0_term,
                                     double lambda) {
    const Vec q = transported_weights(chain, p, tau, gamma, mu0_term);
    for (std::size_t x = 0; x < p.size(); ++x)
        if (p[x] * tau[x] == 0.0 && q[static_cast<Eigen::Index>(x)] > 0.0) return std::numeric_limits<double>::infinity();
    const auto m = inner_max_chi2(chain, p, tau, gamma, mu0_term);
    return saddle_objective_full(chi_squared(), chain, p, tau, m.f, m.u, gamma, mu0_term, lambda);
}

}  // namespace gendice
