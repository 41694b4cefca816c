#pragma once

#include "gendice/dataset.hpp"
#include "gendice/estimator/objective.hpp"
#include "gendice/markov.hpp"
#include "gendice/random.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

namespace gendice {

/// Starting point of training. Tabular functions start at tau = 1, f = 0; networks take
/// fresh weights derived from cfg.seed.
inline SaddleParams make_saddle(const GenDiceConfig& cfg, std::size_t n_states, std::size_t n_actions) {
    const auto n = n_states * n_actions;
    const auto f_head = cfg.effective_f_head();
    if (cfg.param == Parameterization::tabular)
        return {TabularFunction::constant(n, cfg.tau_head, 1.0), TabularFunction::constant(n, f_head, 0.0), 0.0};
    auto features = std::make_shared<const FeatureTable>(FeatureTable::one_hot(n_states, n_actions));
    std::vector<std::size_t> sizes{features->dim()};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(1);
    return {MlpFunction{mlp_init(sizes, cfg.tau_head, cfg.seed * 2 + 1), features},
            MlpFunction{mlp_init(sizes, f_head, cfg.seed * 2 + 2), features}, 0.0};
}

struct TrainResult {
    SaddleParams params;
    std::vector<double> trace;  ///< minibatch objective before each update
    double tau_scale = 1.0;     ///< 1 / mean_D(tau) for self-normalized runs, else 1
};

namespace detail {

/// Per-parameter step: plain SGD or squared-gradient scaling with bias correction.
class Stepper {
public:
    Stepper(const GenDiceConfig& cfg, double lr, double direction) : cfg_(cfg), lr_(lr), dir_(direction) {}

    void step(FunctionModel& m, const ModelGrad& g, long t) {
        if (cfg_.optimizer == Optimizer::sgd) {
            zip_params(m, g, [&](double& w, double gw, std::size_t) { w += dir_ * lr_ * gw; });
            return;
        }
        if (v_.empty()) v_.assign(parameter_count(m), 0.0);
        const double corr = 1.0 - std::pow(cfg_.adaptive_decay, static_cast<double>(t + 1));
        zip_params(m, g, [&](double& w, double gw, std::size_t i) {
            v_[i] = cfg_.adaptive_decay * v_[i] + (1.0 - cfg_.adaptive_decay) * gw * gw;
            w += dir_ * lr_ * gw / (std::sqrt(v_[i] / corr) + cfg_.adaptive_eps);
        });
    }

    void step(double& w, double gw, long t) {
        if (cfg_.optimizer == Optimizer::sgd) {
            w += dir_ * lr_ * gw;
            return;
        }
        if (v_.empty()) v_.assign(1, 0.0);
        const double corr = 1.0 - std::pow(cfg_.adaptive_decay, static_cast<double>(t + 1));
        v_[0] = cfg_.adaptive_decay * v_[0] + (1.0 - cfg_.adaptive_decay) * gw * gw;
        w += dir_ * lr_ * gw / (std::sqrt(v_[0] / corr) + cfg_.adaptive_eps);
    }

private:
    const GenDiceConfig& cfg_;
    double lr_;
    double dir_;
    std::vector<double> v_;
};

inline double dataset_tau_mean(const FunctionModel& tau, const TransitionDataset& data) {
    double m = 0.0;
    const auto& counts = data.unit_counts();
    for (std::size_t x = 0; x < counts.size(); ++x)
        if (counts[x] > 0) m += static_cast<double>(counts[x]) * evaluate(tau, x);
    return m / static_cast<double>(data.size());
}

}  // namespace detail

/// Draws a minibatch: records with replacement, a' ~ pi(.|s'), and initial states with
/// replacement from the dataset's initial-state samples, a0 ~ pi(.|s0).
inline SaddleBatch sample_batch(const TransitionDataset& data, const Policy& target, std::size_t batch_size, Rng& rng) {
    const auto nA = data.n_actions();
    auto draw_action = [&](std::size_t s) -> std::size_t {
        return nA == 1 ? 0 : sample_categorical(rng, target.row(s));
    };
    SaddleBatch b;
    b.unit.resize(batch_size);
    b.next_unit.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto& r = data[uniform_index(rng, data.size())];
        b.unit[i] = data.unit(r);
        b.next_unit[i] = r.next_state * nA + draw_action(r.next_state);
    }
    const auto& init = data.initial_states();
    b.initial_unit.resize(batch_size);
    for (std::size_t j = 0; j < batch_size; ++j) {
        const auto s0 = init[uniform_index(rng, init.size())];
        b.initial_unit[j] = s0 * nA + draw_action(s0);
    }
    return b;
}

/// Stochastic primal-dual training: every step descends tau and ascends f and u on one
/// minibatch gradient. Throws NumericalDivergence when the objective stops being finite or
/// exceeds cfg.abort_threshold.
inline TrainResult train(const GenDiceConfig& cfg, const TransitionDataset& data, const Policy& target,
                         std::optional<SaddleParams> start = std::nullopt) {
    cfg.validate();
    detail::require(!data.empty(), "train: dataset is empty");
    detail::require(!data.initial_states().empty(), "train: dataset has no initial states");
    detail::require(target.n_states() == data.n_states() && target.n_actions() == data.n_actions(),
                    "train: target policy shape does not match the dataset");

    TrainResult res{start ? std::move(*start) : make_saddle(cfg, data.n_states(), data.n_actions()), {}, 1.0};
    auto& sp = res.params;
    detail::require(n_units(sp.tau) == data.n_units() && n_units(sp.f) == data.n_units(),
                    "train: saddle parameters do not match the dataset");

    Rng rng(cfg.seed);
    detail::Stepper tau_step(cfg, cfg.lr_tau, -1.0), f_step(cfg, cfg.lr_f, +1.0), u_step(cfg, cfg.lr_u, +1.0);
    res.trace.reserve(static_cast<std::size_t>(cfg.steps));
    const double n_records = static_cast<double>(data.size());

    std::vector<std::size_t> visited;
    std::vector<double> weight;  // count(x) / N on visited units
    if (cfg.self_normalize)
        for (std::size_t x = 0; x < data.n_units(); ++x)
            if (data.unit_counts()[x] > 0) {
                visited.push_back(x);
                weight.push_back(static_cast<double>(data.unit_counts()[x]) / n_records);
            }

    for (long t = 0; t < cfg.steps; ++t) {
        const auto batch = sample_batch(data, target, cfg.batch_size, rng);
        double scale = 1.0;
        std::optional<UnitBatch> on_data;
        if (cfg.self_normalize) {
            on_data.emplace(sp.tau, visited);
            double m = 0.0;
            for (std::size_t j = 0; j < visited.size(); ++j) m += weight[j] * on_data->values()[j];
            if (!(m > 0.0) || !std::isfinite(m)) throw NumericalDivergence("dataset mean of tau is not positive", t);
            scale = 1.0 / m;
        }
        ObjectiveAndGrad og;
        try {
            og = objective_and_gradients(sp, batch, cfg, scale);
        } catch (const DomainError& e) {
            throw NumericalDivergence(std::string("objective left the conjugate domain (") + e.what() + ")", t);
        }
        if (!std::isfinite(og.objective) || std::abs(og.objective) > cfg.abort_threshold)
            throw NumericalDivergence("objective reached " + std::to_string(og.objective), t);
        res.trace.push_back(og.objective);

        if (on_data && og.dJ_dscale != 0.0) {
            // d scale / d tau(x) = -scale^2 count(x) / N
            std::vector<double> c(visited.size());
            for (std::size_t j = 0; j < c.size(); ++j) c[j] = -og.dJ_dscale * scale * scale * weight[j];
            on_data->accumulate(c, og.grad.tau);
        }
        bool finite = std::isfinite(og.grad.u);
        for_each_grad(og.grad.tau, [&](double g) { finite = finite && std::isfinite(g); });
        for_each_grad(og.grad.f, [&](double g) { finite = finite && std::isfinite(g); });
        if (!finite) throw NumericalDivergence("non-finite gradient", t);

        tau_step.step(sp.tau, og.grad.tau, t);
        f_step.step(sp.f, og.grad.f, t);
        u_step.step(sp.u, og.grad.u, t);
    }
    if (cfg.self_normalize) res.tau_scale = 1.0 / detail::dataset_tau_mean(sp.tau, data);
    return res;
}

}  // namespace gendice
