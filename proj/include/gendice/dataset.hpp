#pragma once

#include "gendice/common.hpp"
#include "gendice/markov.hpp"
#include "gendice/random.hpp"

#include <string>
#include <vector>

namespace gendice {

struct Transition {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;
    std::size_t next_state = 0;

    bool operator==(const Transition&) const = default;
};

/// Off-line transitions (s, a, r, s') together with initial-state samples. Records keep
/// their collection order; `episode_starts` marks where each trajectory begins so
/// trajectory-wise estimators can recover the structure.
class TransitionDataset {
public:
    TransitionDataset(std::size_t n_states, std::size_t n_actions, std::vector<Transition> records,
                      std::vector<std::size_t> initial_states, std::vector<std::size_t> episode_starts = {})
        : n_states_(n_states),
          n_actions_(n_actions),
          records_(std::move(records)),
          initial_states_(std::move(initial_states)),
          episode_starts_(std::move(episode_starts)) {
        detail::require(n_states_ > 0 && n_actions_ > 0, "dataset shape must be positive");
        if (episode_starts_.empty() && !records_.empty()) episode_starts_.push_back(0);
        for (const auto& r : records_)
            detail::require(r.state < n_states_ && r.next_state < n_states_ && r.action < n_actions_,
                            "dataset record index out of range");
        for (auto s : initial_states_) detail::require(s < n_states_, "initial state out of range");
        for (std::size_t i = 0; i < episode_starts_.size(); ++i) {
            detail::require(episode_starts_[i] < records_.size() || records_.empty(), "episode start out of range");
            detail::require(i == 0 || episode_starts_[i] > episode_starts_[i - 1], "episode starts must increase");
        }
        unit_counts_.assign(n_states_ * n_actions_, 0);
        for (const auto& r : records_) ++unit_counts_[r.state * n_actions_ + r.action];
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    std::size_t n_units() const noexcept { return n_states_ * n_actions_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const std::vector<Transition>& records() const noexcept { return records_; }
    const Transition& operator[](std::size_t i) const { return records_[i]; }
    const std::vector<std::size_t>& initial_states() const noexcept { return initial_states_; }
    const std::vector<std::size_t>& episode_starts() const noexcept { return episode_starts_; }
    const std::vector<long>& unit_counts() const noexcept { return unit_counts_; }

    std::size_t n_episodes() const noexcept { return episode_starts_.size(); }
    std::pair<std::size_t, std::size_t> episode_range(std::size_t e) const {
        const auto end = e + 1 < episode_starts_.size() ? episode_starts_[e + 1] : records_.size();
        return {episode_starts_[e], end};
    }

    std::size_t unit(const Transition& r) const { return r.state * n_actions_ + r.action; }

    /// Empirical distribution p-hat over state-action pairs.
    std::vector<double> empirical_unit_distribution() const {
        detail::require(!records_.empty(), "empirical distribution of an empty dataset");
        std::vector<double> p(unit_counts_.size());
        const double n = static_cast<double>(records_.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(unit_counts_[i]) / n;
        return p;
    }

    /// Empirical distribution p-hat over states.
    std::vector<double> empirical_state_distribution() const {
        detail::require(!records_.empty(), "empirical distribution of an empty dataset");
        std::vector<double> p(n_states_, 0.0);
        const double inc = 1.0 / static_cast<double>(records_.size());
        for (const auto& r : records_) p[r.state] += inc;
        return p;
    }

    /// Empirical distribution of the initial-state samples.
    std::vector<double> empirical_initial_distribution() const {
        detail::require(!initial_states_.empty(), "dataset has no initial states");
        std::vector<double> p(n_states_, 0.0);
        const double inc = 1.0 / static_cast<double>(initial_states_.size());
        for (auto s : initial_states_) p[s] += inc;
        return p;
    }

    bool operator==(const TransitionDataset&) const = default;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<Transition> records_;
    std::vector<std::size_t> initial_states_;
    std::vector<std::size_t> episode_starts_;
    std::vector<long> unit_counts_;
};

namespace detail {

inline std::size_t sample_next_state(Rng& rng, const TabularMDP& mdp, std::size_t s, std::size_t a) {
    const auto row = static_cast<Eigen::Index>(s * mdp.n_actions() + a);
    const double fallback = mdp.uniform_weight()[static_cast<std::size_t>(row)];
    double u = uniform01(rng);
    if (u < fallback) return uniform_index(rng, mdp.n_states());
    u -= fallback;
    std::size_t last = 0;
    for (SparseRowMat::InnerIterator it(mdp.transition(), row); it; ++it) {
        last = static_cast<std::size_t>(it.col());
        if (u < it.value()) return last;
        u -= it.value();
    }
    return last;
}

inline std::size_t sample_next_state(Rng& rng, const MarkovChain& chain, std::size_t v) {
    const auto row = static_cast<Eigen::Index>(v);
    const double tw = chain.teleport_weight()[v];
    double u = uniform01(rng);
    if (u < tw) return sample_categorical(rng, chain.teleport().probs());
    u -= tw;
    std::size_t last = 0;
    for (SparseRowMat::InnerIterator it(chain.sparse_part(), row); it; ++it) {
        last = static_cast<std::size_t>(it.col());
        if (u < it.value()) return last;
        u -= it.value();
    }
    return last;
}

}  // namespace detail

/// Rolls out `n_trajectories` fixed-horizon trajectories of `policy`, each starting from mu0.
inline TransitionDataset sample_trajectories(const TabularMDP& mdp, const Policy& policy, std::size_t n_trajectories,
                                             std::size_t horizon, std::uint64_t seed) {
    detail::require(horizon >= 1, "sample_trajectories: horizon must be at least 1");
    detail::require(policy.n_states() == mdp.n_states() && policy.n_actions() == mdp.n_actions(),
                    "sample_trajectories: policy shape does not match MDP");
    Rng rng(seed);
    std::vector<Transition> records;
    records.reserve(n_trajectories * horizon);
    std::vector<std::size_t> starts, initial;
    for (std::size_t e = 0; e < n_trajectories; ++e) {
        starts.push_back(records.size());
        std::size_t s = sample_categorical(rng, mdp.mu0().probs());
        initial.push_back(s);
        for (std::size_t t = 0; t < horizon; ++t) {
            const std::size_t a = sample_categorical(rng, policy.row(s));
            const std::size_t next = detail::sample_next_state(rng, mdp, s, a);
            records.push_back({s, a, mdp.reward(s, a), next});
            s = next;
        }
    }
    return TransitionDataset(mdp.n_states(), mdp.n_actions(), std::move(records), std::move(initial), std::move(starts));
}

}  // namespace gendice
