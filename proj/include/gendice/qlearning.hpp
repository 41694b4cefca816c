#pragma once

#include "gendice/dataset.hpp"
#include "gendice/markov.hpp"
#include "gendice/random.hpp"

#include <algorithm>
#include <vector>

namespace gendice {

struct QLearningConfig {
    long episodes = 1000;          ///< one "iteration" is one training episode
    std::size_t episode_length = 100;
    double lr = 0.1;
    double epsilon = 0.1;          ///< exploration rate at the first episode
    double final_epsilon = 0.01;   ///< linearly reached at the last episode
    double policy_epsilon = 0.1;   ///< softening of the returned greedy policy
    std::uint64_t seed = 0;
    std::vector<long> snapshots;   ///< episode counts at which to also emit the policy
};

struct QLearningResult {
    std::vector<double> q;  ///< row-major Q[s][a]
    Policy policy;
    std::vector<Policy> snapshot_policies;  ///< one per entry of QLearningConfig::snapshots
};

/// Greedy policy w.r.t. Q with ties split evenly, mixed with the uniform policy:
/// pi = (1 - eps) greedy + eps / |A|.
inline Policy soft_greedy_policy(const std::vector<double>& q, std::size_t n_states, std::size_t n_actions,
                                 double eps) {
    detail::require(q.size() == n_states * n_actions, "soft_greedy_policy: Q has wrong size");
    std::vector<double> p(q.size());
    for (std::size_t s = 0; s < n_states; ++s) {
        const auto* row = q.data() + s * n_actions;
        const double best = *std::max_element(row, row + n_actions);
        const auto ties = static_cast<double>(std::count(row, row + n_actions, best));
        for (std::size_t a = 0; a < n_actions; ++a)
            p[s * n_actions + a] = (1.0 - eps) * (row[a] == best ? 1.0 / ties : 0.0) + eps / static_cast<double>(n_actions);
    }
    return Policy(n_states, n_actions, std::move(p));
}

/// Tabular Q-learning with epsilon-greedy exploration and periodic resets to mu0.
/// The discount is the MDP's gamma.
inline QLearningResult q_learning(const TabularMDP& mdp, const QLearningConfig& cfg) {
    detail::require(cfg.episodes >= 0, "q_learning: iterations must be non-negative");
    for (std::size_t i = 0; i < cfg.snapshots.size(); ++i)
        detail::require(cfg.snapshots[i] >= 0 && cfg.snapshots[i] <= cfg.episodes,
                        "q_learning: snapshot outside the training run");
    const auto nS = mdp.n_states();
    const auto nA = mdp.n_actions();
    std::vector<double> q(nS * nA, 0.0);
    Rng rng(cfg.seed);
    std::vector<std::size_t> best;
    std::vector<Policy> snaps(cfg.snapshots.size());
    auto take_snapshots = [&](long done) {
        for (std::size_t i = 0; i < cfg.snapshots.size(); ++i)
            if (cfg.snapshots[i] == done) snaps[i] = soft_greedy_policy(q, nS, nA, cfg.policy_epsilon);
    };
    take_snapshots(0);
    for (long ep = 0; ep < cfg.episodes; ++ep) {
        const double frac = cfg.episodes > 1 ? static_cast<double>(ep) / static_cast<double>(cfg.episodes - 1) : 0.0;
        const double eps = cfg.epsilon + (cfg.final_epsilon - cfg.epsilon) * frac;
        std::size_t s = sample_categorical(rng, mdp.mu0().probs());
        for (std::size_t t = 0; t < cfg.episode_length; ++t) {
            const auto* row = q.data() + s * nA;
            std::size_t a;
            if (uniform01(rng) < eps) {
                a = uniform_index(rng, nA);
            } else {
                const double m = *std::max_element(row, row + nA);
                best.clear();
                for (std::size_t b = 0; b < nA; ++b)
                    if (row[b] == m) best.push_back(b);
                a = best[uniform_index(rng, best.size())];
            }
            const double r = mdp.reward(s, a);
            const std::size_t next = detail::sample_next_state(rng, mdp, s, a);
            const auto* nrow = q.data() + next * nA;
            const double target = r + mdp.gamma() * *std::max_element(nrow, nrow + nA);
            q[s * nA + a] += cfg.lr * (target - q[s * nA + a]);
            s = next;
        }
        take_snapshots(ep + 1);
    }
    auto policy = soft_greedy_policy(q, nS, nA, cfg.policy_epsilon);
    return {std::move(q), std::move(policy), std::move(snaps)};
}

inline QLearningResult q_learning(const TabularMDP& mdp, long iterations, double lr, double epsilon,
                                  std::uint64_t seed) {
    QLearningConfig cfg;
    cfg.episodes = iterations;
    cfg.lr = lr;
    cfg.epsilon = epsilon;
    cfg.seed = seed;
    return q_learning(mdp, cfg);
}

}  // namespace gendice
