#pragma once

#include "gendice/common.hpp"
#include "gendice/dataset.hpp"
#include "gendice/markov.hpp"

#include <map>
#include <string>
#include <vector>

namespace gendice {

/// Count-based tabular model. Visited rows hold (count + smoothing) / (n + smoothing |S|);
/// rows never seen in the data are uniform and flagged in `visited`.
struct EmpiricalModel {
    TabularMDP mdp;                 ///< fitted dynamics; mu0 = empirical initial distribution
    std::vector<long> visit_counts;  ///< per (s, a)
    std::vector<char> visited;       ///< per (s, a)
    double smoothing = 0.0;

    std::size_t n_states() const { return mdp.n_states(); }
    std::size_t n_actions() const { return mdp.n_actions(); }
};

inline EmpiricalModel fit_model(const TransitionDataset& data, double smoothing = 0.0) {
    detail::require(!data.empty(), "fit_model: dataset is empty");
    detail::require(smoothing >= 0.0, "fit_model: smoothing must be non-negative");
    const auto nS = data.n_states();
    const auto nA = data.n_actions();
    const auto nU = data.n_units();
    std::map<std::pair<std::size_t, std::size_t>, double> counts;
    std::vector<double> reward_sum(nU, 0.0);
    for (const auto& r : data.records()) {
        counts[{data.unit(r), r.next_state}] += 1.0;
        reward_sum[data.unit(r)] += r.reward;
    }
    const auto& n = data.unit_counts();
    std::vector<Triplet> trips;
    trips.reserve(counts.size());
    std::vector<double> uniform(nU, 1.0), reward(nU, 0.0);
    std::vector<char> visited(nU, 0);
    const double spread = smoothing * static_cast<double>(nS);
    for (std::size_t x = 0; x < nU; ++x)
        if (n[x] > 0) {
            visited[x] = 1;
            const double denom = static_cast<double>(n[x]) + spread;
            uniform[x] = spread / denom;
            reward[x] = reward_sum[x] / static_cast<double>(n[x]);
        }
    for (const auto& [key, c] : counts) {
        const double denom = static_cast<double>(n[key.first]) + spread;
        trips.emplace_back(static_cast<int>(key.first), static_cast<int>(key.second), c / denom);
    }
    SparseRowMat T(static_cast<Eigen::Index>(nU), static_cast<Eigen::Index>(nS));
    T.setFromTriplets(trips.begin(), trips.end());
    Distribution mu0 = data.initial_states().empty() ? Distribution::uniform(nS)
                                                     : Distribution(data.empirical_initial_distribution());
    return {TabularMDP(nS, nA, std::move(T), std::move(reward), std::move(mu0), 1.0, std::move(uniform)), n,
            std::move(visited), smoothing};
}

/// Stationary distribution of the fitted model under `policy`, dotted with the fitted rewards.
inline double model_based_value(const EmpiricalModel& model, const Policy& policy, double gamma,
                                const Distribution& mu0, const StationaryOptions& opt = {}) {
    detail::require(mu0.size() == model.n_states(), "model_based_value: mu0 has wrong size");
    const auto chain = state_chain(model.mdp, policy);
    const auto d = stationary_oracle(chain, gamma, mu0, opt);
    double v = 0.0;
    for (std::size_t s = 0; s < model.n_states(); ++s)
        for (std::size_t a = 0; a < model.n_actions(); ++a) v += d[s] * policy(s, a) * model.mdp.reward(s, a);
    return v;
}

/// Stationary state distribution of a fitted single-action model (off-line PageRank).
inline Distribution model_based_stationary(const EmpiricalModel& model, const StationaryOptions& opt = {}) {
    detail::require(model.n_actions() == 1, "model_based_stationary: expects a single-action model");
    const auto chain = state_chain(model.mdp, Policy::uniform(model.n_states(), 1));
    return stationary_oracle(chain, 1.0, model.mdp.mu0(), opt);
}

/// pi-hat_b(a|s) = count(s,a) / count(s), uniform on states absent from the data.
inline Policy behavior_clone(const TransitionDataset& data) {
    detail::require(!data.empty(), "behavior_clone: dataset is empty");
    const auto nS = data.n_states();
    const auto nA = data.n_actions();
    std::vector<double> p(nS * nA, 0.0);
    const auto& n = data.unit_counts();
    for (std::size_t s = 0; s < nS; ++s) {
        double total = 0.0;
        for (std::size_t a = 0; a < nA; ++a) total += static_cast<double>(n[s * nA + a]);
        for (std::size_t a = 0; a < nA; ++a)
            p[s * nA + a] = total > 0.0 ? static_cast<double>(n[s * nA + a]) / total : 1.0 / static_cast<double>(nA);
    }
    return Policy(nS, nA, std::move(p));
}

/// Per-decision importance weights normalized across trajectories at each time step:
/// result[t][j] for trajectories j longer than t (zero otherwise).
inline std::vector<std::vector<double>> wis_normalized_weights(const TransitionDataset& data, const Policy& target,
                                                               const Policy& behavior) {
    detail::require(!data.empty(), "wis: dataset is empty");
    detail::require(target.n_states() == data.n_states() && target.n_actions() == data.n_actions() &&
                        behavior.n_states() == data.n_states() && behavior.n_actions() == data.n_actions(),
                    "wis: policy shape does not match the dataset");
    const auto n_traj = data.n_episodes();
    std::size_t horizon = 0;
    for (std::size_t j = 0; j < n_traj; ++j) {
        const auto [b, e] = data.episode_range(j);
        horizon = std::max(horizon, e - b);
    }
    std::vector<std::vector<double>> w(horizon, std::vector<double>(n_traj, 0.0));
    for (std::size_t j = 0; j < n_traj; ++j) {
        const auto [b, e] = data.episode_range(j);
        double prod = 1.0;
        for (std::size_t i = b; i < e; ++i) {
            const auto& r = data[i];
            const double pb = behavior(r.state, r.action);
            if (pb <= 0.0)
                throw InvalidArgument("wis: behavior probability is zero for record " + std::to_string(i) + " (s=" +
                                      std::to_string(r.state) + ", a=" + std::to_string(r.action) + ")");
            prod *= target(r.state, r.action) / pb;
            w[i - b][j] = prod;
        }
    }
    for (auto& row : w) {
        double s = 0.0;
        for (double v : row) s += v;
        if (s > 0.0)
            for (double& v : row) v /= s;
    }
    return w;
}

/// Step-wise weighted importance sampling. gamma = 1 gives the average reward
/// sum_t rbar_t / (T + 1); gamma < 1 weights rbar_t by (1 - gamma) gamma^t, normalized over
/// the observed horizon. rbar_t is the normalized-weight mean reward at step t.
inline double wis_estimate(const TransitionDataset& data, const Policy& target, const Policy& behavior, double gamma) {
    detail::require(gamma >= 0.0 && gamma <= 1.0, "wis: gamma must lie in [0, 1]");
    const auto w = wis_normalized_weights(data, target, behavior);
    std::vector<double> rbar(w.size(), 0.0);
    for (std::size_t j = 0; j < data.n_episodes(); ++j) {
        const auto [b, e] = data.episode_range(j);
        for (std::size_t i = b; i < e; ++i) rbar[i - b] += w[i - b][j] * data[i].reward;
    }
    double num = 0.0, den = 0.0, disc = 1.0;
    for (std::size_t t = 0; t < rbar.size(); ++t) {
        const double c = gamma == 1.0 ? 1.0 : (1.0 - gamma) * disc;
        num += c * rbar[t];
        den += c;
        disc *= gamma;
    }
    return num / den;
}

}  // namespace gendice
