#pragma once

#include "gendice/gendice.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

namespace testutil {

using Dense = std::vector<std::vector<double>>;

inline Dense random_stochastic(std::size_t n, std::mt19937_64& rng, double density = 1.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dense P(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != (i + 1) % n && u(rng) > density) continue;
            P[i][j] = 0.05 + u(rng);
            s += P[i][j];
        }
        for (auto& x : P[i]) x /= s;
    }
    return P;
}

inline std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng, double floor = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& x : p) s += (x = floor + u(rng));
    for (auto& x : p) x /= s;
    return p;
}

/// Left Perron vector of P via a dense eigendecomposition.
inline std::vector<double> eigen_stationary(const Dense& P) {
    const auto n = static_cast<Eigen::Index>(P.size());
    Eigen::MatrixXd Pt(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) Pt(j, i) = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    Eigen::EigenSolver<Eigen::MatrixXd> es(Pt);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < n; ++k)
        if (std::abs(es.eigenvalues()[k] - 1.0) < std::abs(es.eigenvalues()[best] - 1.0)) best = k;
    Eigen::VectorXd v = es.eigenvectors().col(best).real();
    v /= v.sum();
    return {v.data(), v.data() + v.size()};
}

/// Plain dense power iteration, independent of the library solver.
inline std::vector<double> dense_power(const Dense& P, std::size_t iters = 20000) {
    const auto n = P.size();
    std::vector<double> mu(n, 1.0 / static_cast<double>(n)), next(n);
    for (std::size_t k = 0; k < iters; ++k) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[j] += mu[i] * P[i][j];
        mu.swap(next);
    }
    double s = 0.0;
    for (double x : mu) s += x;
    for (double& x : mu) x /= s;
    return mu;
}

/// (1-g) sum_{t<=T} g^t d_t with d_{t+1} = P^T d_t, simulated densely.
inline std::vector<double> truncated_series(const Dense& P, const std::vector<double>& mu0, double g, std::size_t T) {
    const auto n = P.size();
    std::vector<double> d = mu0, out(n, 0.0), next(n);
    double w = 1.0 - g;
    for (std::size_t t = 0; t <= T; ++t) {
        for (std::size_t i = 0; i < n; ++i) out[i] += w * d[i];
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[j] += d[i] * P[i][j];
        d.swap(next);
        w *= g;
    }
    return out;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline gendice::TabularMDP random_mdp(std::size_t nS, std::size_t nA, std::mt19937_64& rng, double gamma = 1.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<std::vector<double>>> P(nS, std::vector<std::vector<double>>(nA));
    std::vector<std::vector<double>> R(nS, std::vector<double>(nA));
    for (std::size_t s = 0; s < nS; ++s)
        for (std::size_t a = 0; a < nA; ++a) {
            P[s][a] = random_simplex(nS, rng, 0.05);
            R[s][a] = u(rng);
        }
    return gendice::TabularMDP::from_dense(P, R, gendice::Distribution(random_simplex(nS, rng, 0.1)), gamma);
}

inline gendice::Policy random_policy(std::size_t nS, std::size_t nA, std::mt19937_64& rng) {
    std::vector<double> p;
    for (std::size_t s = 0; s < nS; ++s) {
        auto row = random_simplex(nA, rng, 0.1);
        p.insert(p.end(), row.begin(), row.end());
    }
    return gendice::Policy(nS, nA, std::move(p));
}

/// Dense P^pi(s'|s) of an MDP under a policy.
inline Dense dense_state_chain(const gendice::TabularMDP& m, const gendice::Policy& pi) {
    Dense P(m.n_states(), std::vector<double>(m.n_states(), 0.0));
    for (std::size_t s = 0; s < m.n_states(); ++s)
        for (std::size_t a = 0; a < m.n_actions(); ++a)
            for (std::size_t t = 0; t < m.n_states(); ++t) P[s][t] += pi(s, a) * m.prob(s, a, t);
    return P;
}

}  // namespace testutil
