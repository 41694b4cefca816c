#pragma once

#include "gendice/baselines.hpp"
#include "gendice/env/graph.hpp"
#include "gendice/env/taxi.hpp"
#include "gendice/estimator/exact.hpp"
#include "gendice/estimator/readout.hpp"
#include "gendice/estimator/train.hpp"
#include "gendice/experiments/config.hpp"
#include "gendice/experiments/metrics.hpp"
#include "gendice/qlearning.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <thread>
#include <vector>

namespace gendice {

/// splitmix64 over (base, stream, index): independent seeds per run component.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ stream) ^ index);
}

struct SeedOutput {
    std::vector<MetricRecord> records;
    std::vector<double> trace;  ///< objective trace of the seed's last trained run
};

struct RunOutput {
    std::vector<MetricRecord> records;         ///< per-seed rows, then aggregates
    std::vector<std::vector<double>> traces;  ///< one per seed (possibly empty)
};

/// Runs fn(seed_index) for every seed on up to `jobs` threads and returns the outputs in
/// seed order. The first failure in seed order is rethrown.
inline std::vector<SeedOutput> run_seeds(std::size_t n_seeds, std::size_t jobs,
                                         const std::function<SeedOutput(std::size_t)>& fn) {
    std::vector<SeedOutput> out(n_seeds);
    std::vector<std::exception_ptr> errors(n_seeds);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n_seeds; k = next++) {
            try {
                out[k] = fn(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, n_seeds));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

namespace detail {

inline RunOutput collect(std::vector<SeedOutput> seeds) {
    RunOutput r;
    for (auto& s : seeds) {
        r.records.insert(r.records.end(), s.records.begin(), s.records.end());
        r.traces.push_back(std::move(s.trace));
    }
    auto agg = aggregate_over_seeds(r.records);
    r.records.insert(r.records.end(), agg.begin(), agg.end());
    return r;
}

inline bool has_method(const std::vector<std::string>& methods, const std::string& m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
}

inline Graph opr_graph(const ExperimentConfig& cfg, std::uint64_t seed, const std::optional<Graph>& loaded) {
    if (loaded) return *loaded;
    return generate_ba(cfg.opr.n_vertices, cfg.opr.m, cfg.opr.m0, derive_seed(seed, 1), cfg.opr.weighted);
}

inline std::optional<Graph> load_opr_graph(const ExperimentConfig& cfg) {
    if (cfg.opr.graph_file.empty()) return std::nullopt;
    return load_edge_list(cfg.opr.graph_file);
}

inline double tau_mass(const std::vector<double>& tau, const TransitionDataset& data) {
    const auto p = data.empirical_unit_distribution();
    double m = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) m += p[x] * tau[x];
    return m;
}

/// Steps of a self-normalized run matched to `steps` of the penalty run by per-record
/// ratio evaluations: each self-normalized step also passes over all N records.
inline long matched_steps(long steps, std::size_t batch, std::size_t n_records) {
    const double b = static_cast<double>(batch);
    return std::max<long>(1, static_cast<long>(static_cast<double>(steps) * b / (b + static_cast<double>(n_records))));
}

}  // namespace detail

struct RunOptions {
    std::size_t jobs = 1;
};

/// Off-line PageRank: per seed and sample size, compare the estimators against the exact
/// stationary distribution by log KL.
inline RunOutput run_opr(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    cfg.validate();
    const auto loaded = detail::load_opr_graph(cfg);
    const auto& methods = cfg.opr.methods;
    for (const auto& m : methods)
        if (m != "gendice" && m != "gendice-exact" && m != "model-based" && m != "self-normalized")
            throw ConfigError("[opr] unknown method '" + m + "'");
    auto seeds = run_seeds(cfg.n_seeds, opt.jobs, [&](std::size_t k) {
        SeedOutput out;
        const auto seed = derive_seed(cfg.base_seed, 0, k);
        const auto graph = detail::opr_graph(cfg, seed, loaded);
        const auto chain = pagerank_chain(graph, cfg.opr.eta);
        const auto truth = stationary_oracle(chain);
        const auto policy = Policy::uniform(chain.n_states(), 1);
        auto row = [&](const std::string& method, std::size_t n, std::optional<double> lambda,
                       const std::string& metric, double value) {
            out.records.push_back({"opr", method, k, n, std::nullopt, 1.0, lambda, metric, value});
        };
        for (std::size_t i = 0; i < cfg.opr.sample_sizes.size(); ++i) {
            const auto n = cfg.opr.sample_sizes[i];
            const auto data = random_walk_dataset(chain, n, derive_seed(seed, 2, i));
            GenDiceConfig g = cfg.gendice;
            g.gamma = 1.0;
            g.seed = derive_seed(seed, 3, i);
            if (detail::has_method(methods, "gendice")) {
                try {
                    auto res = train(g, data, policy);
                    const auto tau = tau_table(res.params.tau);
                    row("gendice", n, g.lambda, "log_kl", log_kl(estimate_pagerank(tau, data), truth));
                    row("gendice", n, g.lambda, "tau_mean", detail::tau_mass(tau, data));
                    out.trace = std::move(res.trace);
                } catch (const NumericalDivergence& e) {
                    row("gendice", n, g.lambda, "log_kl", std::numeric_limits<double>::infinity());
                    row("gendice", n, g.lambda, "diverged_at_step", static_cast<double>(e.step()));
                }
            }
            if (detail::has_method(methods, "self-normalized")) {
                GenDiceConfig s = g;
                s.self_normalize = true;
                s.steps = detail::matched_steps(g.steps, g.batch_size, data.size());
                try {
                    const auto res = train(s, data, policy);
                    const auto tau = tau_table(res.params.tau, res.tau_scale);
                    row("self-normalized", n, std::nullopt, "log_kl", log_kl(estimate_pagerank(tau, data), truth));
                } catch (const NumericalDivergence& e) {
                    row("self-normalized", n, std::nullopt, "log_kl", std::numeric_limits<double>::infinity());
                    row("self-normalized", n, std::nullopt, "diverged_at_step", static_cast<double>(e.step()));
                }
            }
            if (detail::has_method(methods, "gendice-exact")) {
                const auto tau = empirical_exact_solve(data, policy, 1.0);
                row("gendice-exact", n, std::nullopt, "log_kl", log_kl(estimate_pagerank(tau, data), truth));
            }
            if (detail::has_method(methods, "model-based")) {
                const auto model = fit_model(data, cfg.opr.smoothing);
                row("model-based", n, std::nullopt, "log_kl", log_kl(model_based_stationary(model), truth));
            }
        }
        return out;
    });
    return detail::collect(std::move(seeds));
}

struct TaxiPolicies {
    TabularMDP mdp;
    Policy target;
    Policy base;
};

/// Taxi MDP plus the target policy (Q-learning after target_episodes) and the base policy
/// (snapshot after base_episodes) of the same run.
inline TaxiPolicies taxi_policies(const TaxiSettings& t) {
    TaxiConfig tc;
    tc.grid = t.grid;
    tc.appear_prob = t.appear_prob;
    tc.gamma = t.q_gamma;
    auto mdp = Taxi(tc).mdp();
    QLearningConfig q;
    q.episodes = t.target_episodes;
    q.lr = t.q_lr;
    q.epsilon = t.q_epsilon;
    q.final_epsilon = t.q_final_epsilon;
    q.policy_epsilon = t.policy_epsilon;
    q.seed = t.policy_seed;
    q.snapshots = {t.base_episodes};
    auto ql = q_learning(mdp, q);
    return {std::move(mdp), std::move(ql.policy), std::move(ql.snapshot_policies.front())};
}

/// Taxi off-policy evaluation: behavior (1 - alpha) pi_+ + alpha pi, estimators of the
/// average (gamma = 1) or normalized discounted reward of pi, scored by log MSE over seeds.
inline RunOutput run_ope_taxi(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    cfg.validate();
    const auto& t = cfg.taxi;
    for (const auto& m : t.methods)
        if (m != "gendice" && m != "gendice-cloned" && m != "gendice-trained" && m != "model-based" && m != "wis")
            throw ConfigError("[taxi] unknown method '" + m + "'");
    const auto pol = taxi_policies(t);
    std::vector<double> truth;
    for (double g : t.gammas) truth.push_back(policy_value(pol.mdp, pol.target, g));

    auto seeds = run_seeds(cfg.n_seeds, opt.jobs, [&](std::size_t k) {
        SeedOutput out;
        const auto seed = derive_seed(cfg.base_seed, 0, k);
        for (std::size_t ai = 0; ai < t.alphas.size(); ++ai) {
            const double alpha = t.alphas[ai];
            const auto behavior = mix_policies(pol.base, pol.target, alpha);
            for (std::size_t li = 0; li < t.lengths.size(); ++li) {
                const auto len = t.lengths[li];
                const auto data = sample_trajectories(pol.mdp, behavior, t.n_trajectories, len,
                                                      derive_seed(seed, 10 + ai, li));
                const auto cloned = behavior_clone(data);
                const auto model = detail::has_method(t.methods, "model-based")
                                       ? std::optional<EmpiricalModel>(fit_model(data, t.smoothing))
                                       : std::nullopt;
                for (std::size_t gi = 0; gi < t.gammas.size(); ++gi) {
                    const double gamma = t.gammas[gi];
                    auto row = [&](const std::string& method, std::optional<double> lambda, double value) {
                        out.records.push_back({"ope-taxi", method, k, len, alpha, gamma, lambda, "estimate", value});
                    };
                    if (detail::has_method(t.methods, "gendice"))
                        row("gendice", std::nullopt,
                            estimate_policy_value(empirical_exact_solve(data, pol.target, gamma), data));
                    if (detail::has_method(t.methods, "gendice-cloned"))
                        row("gendice-cloned", std::nullopt,
                            estimate_policy_value(empirical_exact_solve_cloned(data, pol.target, gamma), data));
                    if (detail::has_method(t.methods, "gendice-trained")) {
                        GenDiceConfig g = cfg.gendice;
                        g.gamma = gamma;
                        g.seed = derive_seed(seed, 20 + ai, li * 64 + gi);
                        auto res = train(g, data, pol.target);
                        row("gendice-trained", g.lambda, estimate_policy_value(tau_table(res.params.tau), data));
                        out.trace = std::move(res.trace);
                    }
                    if (model) row("model-based", std::nullopt, model_based_value(*model, pol.target, gamma, model->mdp.mu0()));
                    if (detail::has_method(t.methods, "wis"))
                        row("wis", std::nullopt, wis_estimate(data, pol.target, cloned, gamma));
                }
            }
        }
        return out;
    });
    auto run = detail::collect(std::move(seeds));

    // log MSE over seeds against the oracle value, one row per cell.
    std::map<std::tuple<std::string, std::size_t, std::string, std::string>, std::vector<double>> cells;
    std::vector<MetricRecord> protos;
    for (const auto& r : run.records) {
        if (!r.seed || r.metric != "estimate") continue;
        auto key = std::make_tuple(r.method, r.n_samples, format_value(*r.alpha), format_value(*r.gamma));
        auto [it, fresh] = cells.try_emplace(key);
        if (fresh) protos.push_back(r);
        it->second.push_back(r.value);
    }
    for (const auto& p : protos) {
        const auto gi = static_cast<std::size_t>(
            std::find(t.gammas.begin(), t.gammas.end(), *p.gamma) - t.gammas.begin());
        const auto& est = cells[std::make_tuple(p.method, p.n_samples, format_value(*p.alpha), format_value(*p.gamma))];
        MetricRecord m = p;
        m.seed.reset();
        m.metric = "log_mse";
        m.value = log_mse(est, truth[gi]);
        run.records.push_back(m);
    }
    for (std::size_t gi = 0; gi < t.gammas.size(); ++gi)
        run.records.push_back({"ope-taxi", "oracle", std::nullopt, 0, std::nullopt, t.gammas[gi], std::nullopt, "truth",
                               truth[gi]});
    return run;
}

/// One-factor sweeps of trained GenDICE on off-line PageRank at a fixed sample size.
inline RunOutput run_ablation(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    cfg.validate();
    if (!is_ablation(cfg.task)) throw ConfigError("run_ablation: task is not an ablation");
    const auto loaded = detail::load_opr_graph(cfg);
    const auto values = cfg.ablation_values();
    if (values.empty()) throw ConfigError("[ablation] no values to sweep");
    std::vector<GenDiceConfig> cells;
    std::string factor;
    for (const auto& v : values) {
        GenDiceConfig g = cfg.gendice;
        g.gamma = 1.0;
        try {
            switch (cfg.task) {
                case Task::ablation_lambda:
                    factor = "lambda";
                    g.lambda = detail::parse_value<double>("values", v);
                    break;
                case Task::ablation_divergence:
                    factor = "divergence";
                    g.divergence = divergence_by_name(v);
                    break;
                case Task::ablation_activation:
                    factor = "activation";
                    g.tau_head = head_by_name(v);
                    break;
                default:
                    factor = "penalty";
                    g.penalty = detail::parse_value<bool>("values", v);
                    break;
            }
            g.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError("[ablation] value '" + v + "': " + e.what());
        }
        cells.push_back(std::move(g));
    }
    const auto task = to_string(cfg.task);
    auto seeds = run_seeds(cfg.n_seeds, opt.jobs, [&](std::size_t k) {
        SeedOutput out;
        const auto seed = derive_seed(cfg.base_seed, 0, k);
        const auto graph = detail::opr_graph(cfg, seed, loaded);
        const auto chain = pagerank_chain(graph, cfg.opr.eta);
        const auto truth = stationary_oracle(chain);
        const auto policy = Policy::uniform(chain.n_states(), 1);
        const auto n = cfg.ablation.n_samples;
        const auto data = random_walk_dataset(chain, n, derive_seed(seed, 2, 0));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            GenDiceConfig g = cells[c];
            g.seed = derive_seed(seed, 3, 0);
            const std::string method = factor + "=" + values[c];
            auto row = [&](const std::string& metric, double value) {
                out.records.push_back({task, method, k, n, std::nullopt, 1.0, g.effective_lambda(), metric, value});
            };
            try {
                auto res = train(g, data, policy);
                const auto tau = tau_table(res.params.tau);
                row("log_kl", log_kl(estimate_pagerank(tau, data), truth));
                row("tau_mean", detail::tau_mass(tau, data));
                out.trace = std::move(res.trace);
            } catch (const NumericalDivergence& e) {
                row("log_kl", std::numeric_limits<double>::infinity());
                row("diverged_at_step", static_cast<double>(e.step()));
            }
        }
        return out;
    });
    return detail::collect(std::move(seeds));
}

inline RunOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    switch (cfg.task) {
        case Task::opr: return run_opr(cfg, opt);
        case Task::ope_taxi: return run_ope_taxi(cfg, opt);
        default: return run_ablation(cfg, opt);
    }
}

}  // namespace gendice
