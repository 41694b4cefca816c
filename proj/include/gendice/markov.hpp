#pragma once

#include "gendice/common.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gendice {

/// Row-stochastic transition operator stored as a sparse part plus a rank-one teleport part:
///
///     P(u | v) = S(v, u) + teleport_weight[v] * teleport[u]
///
/// PageRank teleportation and uniform fallback rows of fitted models both live in the
/// rank-one term, so large chains never materialize dense rows.
class MarkovChain {
public:
    MarkovChain(SparseRowMat sparse, std::vector<double> teleport_weight, Distribution teleport, Distribution mu0,
                double gamma = 1.0)
        : sparse_(std::move(sparse)),
          teleport_weight_(std::move(teleport_weight)),
          teleport_(std::move(teleport)),
          mu0_(std::move(mu0)),
          gamma_(gamma) {
        validate();
    }

    /// Builds a chain from a dense row-major matrix P[v][u].
    static MarkovChain from_dense(const std::vector<std::vector<double>>& P, Distribution mu0, double gamma = 1.0) {
        const auto n = P.size();
        detail::require(n > 0, "chain must have at least one state");
        std::vector<Triplet> trips;
        for (std::size_t v = 0; v < n; ++v) {
            detail::require(P[v].size() == n, "transition matrix must be square");
            for (std::size_t u = 0; u < n; ++u)
                if (P[v][u] != 0.0) trips.emplace_back(static_cast<int>(v), static_cast<int>(u), P[v][u]);
        }
        SparseRowMat S(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        S.setFromTriplets(trips.begin(), trips.end());
        return MarkovChain(std::move(S), std::vector<double>(n, 0.0), Distribution::uniform(n), std::move(mu0), gamma);
    }

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(sparse_.rows()); }
    double gamma() const noexcept { return gamma_; }
    const Distribution& mu0() const noexcept { return mu0_; }
    const SparseRowMat& sparse_part() const noexcept { return sparse_; }
    const std::vector<double>& teleport_weight() const noexcept { return teleport_weight_; }
    const Distribution& teleport() const noexcept { return teleport_; }
    bool has_teleport() const {
        return std::any_of(teleport_weight_.begin(), teleport_weight_.end(), [](double w) { return w != 0.0; });
    }

    double entry(std::size_t v, std::size_t u) const {
        return sparse_.coeff(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) +
               teleport_weight_[v] * teleport_[u];
    }

    std::vector<double> row(std::size_t v) const {
        std::vector<double> r(n_states());
        for (std::size_t u = 0; u < r.size(); ++u) r[u] = teleport_weight_[v] * teleport_[u];
        for (SparseRowMat::InnerIterator it(sparse_, static_cast<Eigen::Index>(v)); it; ++it)
            r[static_cast<std::size_t>(it.col())] += it.value();
        return r;
    }

    /// P^T mu, i.e. one step of the distribution dynamics.
    Vec transpose_apply(const Vec& mu) const {
        detail::require(static_cast<std::size_t>(mu.size()) == n_states(), "transpose_apply: size mismatch");
        Vec out = sparse_.transpose() * mu;
        double mass = 0.0;
        for (std::size_t v = 0; v < teleport_weight_.size(); ++v) mass += teleport_weight_[v] * mu[static_cast<Eigen::Index>(v)];
        if (mass != 0.0) out += mass * teleport_.vec();
        return out;
    }

    /// P g, the backward (Bellman-style) application.
    Vec apply(const Vec& g) const {
        detail::require(static_cast<std::size_t>(g.size()) == n_states(), "apply: size mismatch");
        Vec out = sparse_ * g;
        const double tg = teleport_.vec().dot(g);
        for (std::size_t v = 0; v < teleport_weight_.size(); ++v) out[static_cast<Eigen::Index>(v)] += teleport_weight_[v] * tg;
        return out;
    }

private:
    void validate() const {
        const auto n = n_states();
        detail::require(n > 0, "chain must have at least one state");
        detail::require(sparse_.cols() == sparse_.rows(), "transition matrix must be square");
        detail::require(teleport_weight_.size() == n && teleport_.size() == n && mu0_.size() == n,
                        "chain component sizes disagree");
        detail::require(gamma_ >= 0.0 && gamma_ <= 1.0, "gamma must lie in [0, 1]");
        for (std::size_t v = 0; v < n; ++v) {
            double s = teleport_weight_[v];
            detail::require(s >= 0.0, "teleport weights must be non-negative");
            for (SparseRowMat::InnerIterator it(sparse_, static_cast<Eigen::Index>(v)); it; ++it) {
                detail::require(it.value() >= 0.0, "transition probabilities must be non-negative");
                s += it.value();
            }
            if (std::abs(s - 1.0) > kStochasticTol)
                throw InvalidArgument("row " + std::to_string(v) + " of the transition matrix sums to " +
                                      std::to_string(s));
        }
    }

    SparseRowMat sparse_;
    std::vector<double> teleport_weight_;
    Distribution teleport_;
    Distribution mu0_;
    double gamma_;
};

/// Tabular policy pi(a | s), row-major over states.
class Policy {
public:
    Policy() = default;
    Policy(std::size_t n_states, std::size_t n_actions, std::vector<double> probs)
        : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
        detail::require(n_states > 0 && n_actions > 0, "policy shape must be positive");
        detail::require(probs_.size() == n_states * n_actions, "policy table has wrong size");
        for (std::size_t s = 0; s < n_states; ++s)
            detail::require(detail::is_distribution(row(s), kStochasticTol),
                            "policy row " + std::to_string(s) + " is not a distribution");
    }

    static Policy uniform(std::size_t n_states, std::size_t n_actions) {
        return Policy(n_states, n_actions,
                      std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions)));
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double operator()(std::size_t s, std::size_t a) const { return probs_[s * n_actions_ + a]; }
    std::span<const double> row(std::size_t s) const { return {probs_.data() + s * n_actions_, n_actions_}; }
    const std::vector<double>& probs() const noexcept { return probs_; }

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<double> probs_;
};

/// Finite MDP. Transition rows are indexed by s * n_actions + a; each row is a sparse
/// distribution over next states plus an optional weight spread uniformly over all states.
class TabularMDP {
public:
    TabularMDP(std::size_t n_states, std::size_t n_actions, SparseRowMat transition, std::vector<double> reward,
               Distribution mu0, double gamma, std::vector<double> uniform_weight = {})
        : n_states_(n_states),
          n_actions_(n_actions),
          transition_(std::move(transition)),
          uniform_weight_(std::move(uniform_weight)),
          reward_(std::move(reward)),
          mu0_(std::move(mu0)),
          gamma_(gamma) {
        if (uniform_weight_.empty()) uniform_weight_.assign(n_states_ * n_actions_, 0.0);
        validate();
    }

    /// Dense construction from P[s][a][s'] and R[s][a].
    static TabularMDP from_dense(const std::vector<std::vector<std::vector<double>>>& P,
                                 const std::vector<std::vector<double>>& R, Distribution mu0, double gamma) {
        const auto nS = P.size();
        detail::require(nS > 0 && !P[0].empty(), "MDP must have states and actions");
        const auto nA = P[0].size();
        std::vector<Triplet> trips;
        std::vector<double> reward(nS * nA);
        detail::require(R.size() == nS, "reward table has wrong number of states");
        for (std::size_t s = 0; s < nS; ++s) {
            detail::require(P[s].size() == nA && R[s].size() == nA, "inconsistent action count");
            for (std::size_t a = 0; a < nA; ++a) {
                detail::require(P[s][a].size() == nS, "next-state row has wrong size");
                reward[s * nA + a] = R[s][a];
                for (std::size_t t = 0; t < nS; ++t)
                    if (P[s][a][t] != 0.0)
                        trips.emplace_back(static_cast<int>(s * nA + a), static_cast<int>(t), P[s][a][t]);
            }
        }
        SparseRowMat T(static_cast<Eigen::Index>(nS * nA), static_cast<Eigen::Index>(nS));
        T.setFromTriplets(trips.begin(), trips.end());
        return TabularMDP(nS, nA, std::move(T), std::move(reward), std::move(mu0), gamma);
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    std::size_t n_units() const noexcept { return n_states_ * n_actions_; }
    double gamma() const noexcept { return gamma_; }
    const Distribution& mu0() const noexcept { return mu0_; }
    const SparseRowMat& transition() const noexcept { return transition_; }
    const std::vector<double>& uniform_weight() const noexcept { return uniform_weight_; }
    const std::vector<double>& rewards() const noexcept { return reward_; }
    double reward(std::size_t s, std::size_t a) const { return reward_[s * n_actions_ + a]; }

    double prob(std::size_t s, std::size_t a, std::size_t next) const {
        const auto r = static_cast<Eigen::Index>(s * n_actions_ + a);
        return transition_.coeff(r, static_cast<Eigen::Index>(next)) +
               uniform_weight_[s * n_actions_ + a] / static_cast<double>(n_states_);
    }

    /// Same MDP with a different discount.
    TabularMDP with_gamma(double gamma) const {
        return TabularMDP(n_states_, n_actions_, transition_, reward_, mu0_, gamma, uniform_weight_);
    }

private:
    void validate() const {
        detail::require(n_states_ > 0 && n_actions_ > 0, "MDP shape must be positive");
        detail::require(static_cast<std::size_t>(transition_.rows()) == n_units() &&
                            static_cast<std::size_t>(transition_.cols()) == n_states_,
                        "transition tensor has wrong shape");
        detail::require(reward_.size() == n_units() && uniform_weight_.size() == n_units(),
                        "reward / fallback table has wrong size");
        detail::require(mu0_.size() == n_states_, "mu0 has wrong size");
        detail::require(gamma_ >= 0.0 && gamma_ <= 1.0, "gamma must lie in [0, 1]");
        for (std::size_t r = 0; r < n_units(); ++r) {
            double s = uniform_weight_[r];
            detail::require(s >= 0.0, "fallback weight must be non-negative");
            for (SparseRowMat::InnerIterator it(transition_, static_cast<Eigen::Index>(r)); it; ++it) {
                detail::require(it.value() >= 0.0, "transition probabilities must be non-negative");
                s += it.value();
            }
            if (std::abs(s - 1.0) > kStochasticTol)
                throw InvalidArgument("transition row (s=" + std::to_string(r / n_actions_) +
                                      ", a=" + std::to_string(r % n_actions_) + ") sums to " + std::to_string(s));
        }
    }

    std::size_t n_states_;
    std::size_t n_actions_;
    SparseRowMat transition_;
    std::vector<double> uniform_weight_;
    std::vector<double> reward_;
    Distribution mu0_;
    double gamma_;
};

/// Chain over state-action pairs x = s * n_actions + a with
/// P^pi((s',a') | (s,a)) = pi(a'|s') P(s'|s,a).
inline MarkovChain induced_chain(const TabularMDP& mdp, const Policy& policy) {
    detail::require(policy.n_states() == mdp.n_states() && policy.n_actions() == mdp.n_actions(),
                    "induced_chain: policy shape does not match MDP");
    const auto nA = mdp.n_actions();
    const auto nS = mdp.n_states();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(mdp.transition().nonZeros()) * nA);
    for (std::size_t r = 0; r < mdp.n_units(); ++r) {
        for (SparseRowMat::InnerIterator it(mdp.transition(), static_cast<Eigen::Index>(r)); it; ++it) {
            const auto next = static_cast<std::size_t>(it.col());
            for (std::size_t a2 = 0; a2 < nA; ++a2) {
                const double pa = policy(next, a2);
                if (pa > 0.0) trips.emplace_back(static_cast<int>(r), static_cast<int>(next * nA + a2), it.value() * pa);
            }
        }
    }
    SparseRowMat S(static_cast<Eigen::Index>(mdp.n_units()), static_cast<Eigen::Index>(mdp.n_units()));
    S.setFromTriplets(trips.begin(), trips.end());

    std::vector<double> tele(mdp.n_units()), start(mdp.n_units());
    for (std::size_t s = 0; s < nS; ++s)
        for (std::size_t a = 0; a < nA; ++a) {
            tele[s * nA + a] = policy(s, a) / static_cast<double>(nS);
            start[s * nA + a] = mdp.mu0()[s] * policy(s, a);
        }
    return MarkovChain(std::move(S), mdp.uniform_weight(), Distribution::normalized(std::move(tele)),
                       Distribution::normalized(std::move(start)), mdp.gamma());
}

/// Chain over states with P^pi(s' | s) = sum_a pi(a|s) P(s'|s,a).
inline MarkovChain state_chain(const TabularMDP& mdp, const Policy& policy) {
    detail::require(policy.n_states() == mdp.n_states() && policy.n_actions() == mdp.n_actions(),
                    "state_chain: policy shape does not match MDP");
    const auto nA = mdp.n_actions();
    const auto nS = mdp.n_states();
    std::vector<Triplet> trips;
    std::vector<double> tw(nS, 0.0);
    for (std::size_t s = 0; s < nS; ++s)
        for (std::size_t a = 0; a < nA; ++a) {
            const double pa = policy(s, a);
            if (pa == 0.0) continue;
            const auto r = s * nA + a;
            tw[s] += pa * mdp.uniform_weight()[r];
            for (SparseRowMat::InnerIterator it(mdp.transition(), static_cast<Eigen::Index>(r)); it; ++it)
                trips.emplace_back(static_cast<int>(s), static_cast<int>(it.col()), pa * it.value());
        }
    SparseRowMat S(static_cast<Eigen::Index>(nS), static_cast<Eigen::Index>(nS));
    S.setFromTriplets(trips.begin(), trips.end());  // duplicates are summed
    return MarkovChain(std::move(S), std::move(tw), Distribution::uniform(nS), mdp.mu0(), mdp.gamma());
}

struct StationaryOptions {
    double tol = 1e-10;
    long max_iter = 100000;
};

namespace detail {

inline Vec power_iteration(const MarkovChain& chain, const Vec& start, const StationaryOptions& opt) {
    Vec mu = start;
    double residual = 0.0;
    // Plain iteration for the first half of the budget; afterwards consecutive iterates are
    // averaged, which removes the oscillation of periodic chains.
    const long plain = opt.max_iter / 2;
    for (long k = 0; k < opt.max_iter; ++k) {
        Vec next = chain.transpose_apply(mu);
        residual = (next - mu).lpNorm<1>();
        if (residual <= opt.tol) return next / next.sum();
        mu = k < plain ? next : Vec(0.5 * (mu + next));
    }
    throw ConvergenceError("power iteration did not converge within " + std::to_string(opt.max_iter) + " iterations",
                           residual);
}

/// Solves (I - gamma P^T) x = b, handling the teleport term with Sherman-Morrison.
inline Vec discounted_solve(const MarkovChain& chain, double gamma, const Vec& b) {
    const auto n = static_cast<Eigen::Index>(chain.n_states());
    Eigen::SparseMatrix<double> A(n, n);
    A.setIdentity();
    A -= gamma * Eigen::SparseMatrix<double>(chain.sparse_part().transpose());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw Error("discounted_solve: factorization failed");
    Vec x = lu.solve(b);
    if (!chain.has_teleport()) return x;
    const Vec w = detail::to_vec(chain.teleport_weight());
    const Vec y = lu.solve(chain.teleport().vec());
    return x + y * (gamma * w.dot(x) / (1.0 - gamma * w.dot(y)));
}

}  // namespace detail

/// Stationary distribution of the chain: the power-iteration limit for gamma = 1 and the
/// discounted occupancy (1-gamma) sum_t gamma^t d_t for gamma < 1.
inline Distribution stationary_oracle(const MarkovChain& chain, double gamma, const Distribution& mu0_term,
                                      const StationaryOptions& opt = {}) {
    detail::require(mu0_term.size() == chain.n_states(), "stationary_oracle: mu0 size mismatch");
    detail::require(opt.tol > 0.0, "stationary_oracle: tol must be positive");
    detail::require(gamma >= 0.0 && gamma <= 1.0, "stationary_oracle: gamma must lie in [0, 1]");
    if (gamma == 0.0) return mu0_term;
    Vec mu;
    if (gamma == 1.0) {
        mu = detail::power_iteration(chain, mu0_term.vec(), opt);
    } else {
        mu = detail::discounted_solve(chain, gamma, (1.0 - gamma) * mu0_term.vec());
    }
    for (auto& v : mu) v = std::max(v, 0.0);
    return Distribution::normalized(detail::to_std(mu));
}

inline Distribution stationary_oracle(const MarkovChain& chain, const StationaryOptions& opt = {}) {
    return stationary_oracle(chain, chain.gamma(), chain.mu0(), opt);
}

/// (1 - gamma) mu0 + gamma P^T mu.
inline Vec apply_T(const Vec& mu, const MarkovChain& chain, double gamma, const Distribution& mu0_term) {
    detail::require(static_cast<std::size_t>(mu.size()) == chain.n_states() && mu0_term.size() == chain.n_states(),
                    "apply_T: dimension mismatch");
    if (gamma == 0.0) return mu0_term.vec();
    return (1.0 - gamma) * mu0_term.vec() + gamma * chain.transpose_apply(mu);
}

/// (1 - alpha) * first + alpha * second, row by row.
inline Policy mix_policies(const Policy& first, const Policy& second, double alpha) {
    detail::require(alpha >= 0.0 && alpha <= 1.0, "mix_policies: alpha must lie in [0, 1]");
    detail::require(first.n_states() == second.n_states() && first.n_actions() == second.n_actions(),
                    "mix_policies: shape mismatch");
    if (alpha == 0.0) return first;
    if (alpha == 1.0) return second;
    std::vector<double> p(first.probs().size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1.0 - alpha) * first.probs()[i] + alpha * second.probs()[i];
    return Policy(first.n_states(), first.n_actions(), std::move(p));
}

/// Stationary state-action occupancy of `policy` under the given discount.
inline Distribution state_action_occupancy(const TabularMDP& mdp, const Policy& policy, double gamma,
                                           const StationaryOptions& opt = {}) {
    const auto chain = state_chain(mdp, policy);
    const auto d = stationary_oracle(chain, gamma, mdp.mu0(), opt);
    std::vector<double> mu(mdp.n_units());
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) mu[s * mdp.n_actions() + a] = d[s] * policy(s, a);
    return Distribution::normalized(std::move(mu));
}

/// Average (gamma = 1) or normalized discounted per-step reward of the policy.
inline double policy_value(const TabularMDP& mdp, const Policy& policy, double gamma,
                           const StationaryOptions& opt = {}) {
    const auto mu = state_action_occupancy(mdp, policy, gamma, opt);
    double v = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) v += mu[x] * mdp.rewards()[x];
    return v;
}

}  // namespace gendice
