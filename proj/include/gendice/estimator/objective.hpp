#pragma once

#include "gendice/divergences.hpp"
#include "gendice/estimator/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gendice {

enum class Optimizer { sgd, adaptive };
enum class Parameterization { tabular, mlp };

inline Parameterization parameterization_by_name(const std::string& name) {
    if (name == "tabular") return Parameterization::tabular;
    if (name == "mlp") return Parameterization::mlp;
    throw ConfigError("unknown parameterization '" + name + "' (expected tabular | mlp)");
}
inline std::string to_string(Parameterization p) { return p == Parameterization::tabular ? "tabular" : "mlp"; }

inline Optimizer optimizer_by_name(const std::string& name) {
    if (name == "sgd") return Optimizer::sgd;
    if (name == "adaptive") return Optimizer::adaptive;
    throw ConfigError("unknown optimizer '" + name + "' (expected sgd | adaptive)");
}
inline std::string to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adaptive"; }

struct GenDiceConfig {
    double lambda = 1.0;
    double gamma = 1.0;
    FDivergence divergence = chi_squared();
    bool penalty = true;          ///< false drops the lambda term (ablation only)
    bool self_normalize = false;  ///< train on tau / mean_D(tau) instead of the penalty
    double lr_tau = 0.001;
    double lr_f = 0.001;
    double lr_u = 0.001;
    std::size_t batch_size = 2048;
    long steps = 1000;
    OutputHead tau_head = OutputHead::square;
    /// identity by default; divergences with a bounded conjugate domain switch to below_log2.
    OutputHead f_head = OutputHead::identity;
    Parameterization param = Parameterization::tabular;
    std::vector<std::size_t> hidden{64, 64};
    Optimizer optimizer = Optimizer::sgd;
    double adaptive_decay = 0.99;   ///< squared-gradient averaging for Optimizer::adaptive
    double adaptive_eps = 1e-8;
    double abort_threshold = 1e8;   ///< |J| above this aborts training
    std::uint64_t seed = 0;

    double effective_lambda() const { return penalty && !self_normalize ? lambda : 0.0; }

    OutputHead effective_f_head() const {
        if (f_head == OutputHead::identity && std::isfinite(divergence.conjugate_sup)) return OutputHead::below_log2;
        return f_head;
    }

    void validate() const {
        detail::require(lambda > 0.0, "lambda must be positive");
        detail::require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
        detail::require(batch_size >= 1, "batch_size must be at least 1");
        detail::require(steps >= 0, "steps must be non-negative");
        detail::require(lr_tau >= 0.0 && lr_f >= 0.0 && lr_u >= 0.0, "learning rates must be non-negative");
        detail::require(tau_head != OutputHead::identity && tau_head != OutputHead::below_log2,
                        "tau needs a non-negative output head");
    }
};

/// One minibatch of the saddle objective, expressed as unit indices:
/// unit[i] = (s_i, a_i), next_unit[i] = (s'_i, a'_i) with a'_i ~ pi(.|s'_i), and
/// initial_unit[j] = (s0_j, a0_j) with a0_j ~ pi(.|s0_j).
struct SaddleBatch {
    std::vector<std::size_t> unit;
    std::vector<std::size_t> next_unit;
    std::vector<std::size_t> initial_unit;

    void validate() const {
        detail::require(!unit.empty(), "batch is empty");
        detail::require(unit.size() == next_unit.size(), "batch unit / next_unit sizes differ");
        detail::require(!initial_unit.empty(), "batch has no initial samples");
    }
};

namespace detail {

template <class Conjugate>
double batch_objective(const SaddleParams& sp, const SaddleBatch& batch, double gamma, double lambda,
                       Conjugate&& phi_star) {
    batch.validate();
    const double B = static_cast<double>(batch.unit.size());
    const double B0 = static_cast<double>(batch.initial_unit.size());
    double init = 0.0;
    for (auto x0 : batch.initial_unit) init += evaluate(sp.f, x0);
    double cross = 0.0, conj = 0.0, tau_mean = 0.0;
    for (std::size_t i = 0; i < batch.unit.size(); ++i) {
        const double t = evaluate(sp.tau, batch.unit[i]);
        const double f = evaluate(sp.f, batch.unit[i]);
        cross += t * evaluate(sp.f, batch.next_unit[i]);
        conj += t * phi_star(f);
        tau_mean += t;
    }
    tau_mean /= B;
    return (1.0 - gamma) * (init / B0) + gamma * (cross / B) - conj / B +
           lambda * (sp.u * tau_mean - sp.u - sp.u * sp.u / 2.0);
}

}  // namespace detail

/// Empirical chi-square saddle objective
/// (1-g) E[f(s0,a0)] + g E[tau(s,a) f(s',a')] - E[tau(s,a)(f(s,a) + f(s,a)^2/4)]
///   + lambda (E[u tau(s,a) - u] - u^2/2).
inline double objective_chi2(const SaddleParams& sp, const SaddleBatch& batch, const GenDiceConfig& cfg) {
    return detail::batch_objective(sp, batch, cfg.gamma, cfg.effective_lambda(),
                                   [](double y) { return y + y * y / 4.0; });
}

/// Same objective with the configured divergence's conjugate in place of f + f^2/4.
inline double objective_general(const SaddleParams& sp, const SaddleBatch& batch, const GenDiceConfig& cfg) {
    return detail::batch_objective(sp, batch, cfg.gamma, cfg.effective_lambda(),
                                   [&](double y) { return cfg.divergence.conjugate(y); });
}

struct SaddleGrad {
    ModelGrad tau;
    double u = 0.0;
    ModelGrad f;
};

struct ObjectiveAndGrad {
    double objective = 0.0;
    SaddleGrad grad;
    double tau_mean = 0.0;     ///< batch mean of the (scaled) ratio
    double dJ_dscale = 0.0;    ///< derivative of the objective w.r.t. tau_scale
};

/// Objective value and unbiased minibatch gradients for (tau, u, f):
///   dJ/dw_tau = g E[dtau f(s',a')] - E[dtau phi*(f)] + lambda u E[dtau]
///   dJ/du     = lambda (E[tau - 1] - u)
///   dJ/dw_f   = (1-g) E[df(s0,a0)] + g E[tau df(s',a')] - E[tau phi*'(f) df]
/// Per-record coefficients are first reduced onto distinct units, then pushed through each
/// model once per unit in increasing unit order.
///
/// The ratio enters as tau_scale * tau(x); `tau_scale` stays 1 except for self-normalized
/// training, which also needs dJ_dscale.
inline ObjectiveAndGrad objective_and_gradients(const SaddleParams& sp, const SaddleBatch& batch,
                                                const GenDiceConfig& cfg, double tau_scale = 1.0) {
    batch.validate();
    const auto n = n_units(sp.tau);
    detail::require(n_units(sp.f) == n, "tau and f are defined on different unit spaces");
    const double gamma = cfg.gamma;
    const double lambda = cfg.effective_lambda();
    const double B = static_cast<double>(batch.unit.size());
    const double B0 = static_cast<double>(batch.initial_unit.size());

    // Distinct units in increasing order, and each unit's slot in the value arrays.
    std::vector<char> need_tau(n, 0), need_f(n, 0);
    auto mark = [&](std::vector<char>& flags, std::size_t x) {
        detail::require(x < n, "batch unit out of range");
        flags[x] = 1;
    };
    for (auto x0 : batch.initial_unit) mark(need_f, x0);
    for (std::size_t i = 0; i < batch.unit.size(); ++i) {
        mark(need_tau, batch.unit[i]);
        mark(need_f, batch.unit[i]);
        mark(need_f, batch.next_unit[i]);
    }
    std::vector<std::size_t> tau_units, f_units;
    std::vector<std::size_t> tau_slot(n, 0), f_slot(n, 0);
    for (std::size_t x = 0; x < n; ++x) {
        if (need_tau[x]) {
            tau_slot[x] = tau_units.size();
            tau_units.push_back(x);
        }
        if (need_f[x]) {
            f_slot[x] = f_units.size();
            f_units.push_back(x);
        }
    }
    const UnitBatch tau_b(sp.tau, std::move(tau_units)), f_b(sp.f, std::move(f_units));
    const auto& tv = tau_b.values();
    const auto& fv = f_b.values();
    std::vector<double> c_tau(tv.size(), 0.0), c_f(fv.size(), 0.0);

    double init = 0.0;
    for (auto x0 : batch.initial_unit) {
        init += fv[f_slot[x0]];
        c_f[f_slot[x0]] += (1.0 - gamma) / B0;
    }
    double cross = 0.0, conj = 0.0, tau_mean = 0.0;
    for (std::size_t i = 0; i < batch.unit.size(); ++i) {
        const auto x = batch.unit[i], xn = batch.next_unit[i];
        const double t = tau_scale * tv[tau_slot[x]], f = fv[f_slot[x]], fn = fv[f_slot[xn]];
        const double ps = cfg.divergence.conjugate(f);
        cross += t * fn;
        conj += t * ps;
        tau_mean += t;
        c_tau[tau_slot[x]] += (gamma * fn - ps + lambda * sp.u) / B;
        c_f[f_slot[xn]] += gamma * t / B;
        c_f[f_slot[x]] -= t * cfg.divergence.conjugate_deriv(f) / B;
    }
    tau_mean /= B;

    ObjectiveAndGrad out;
    out.objective = (1.0 - gamma) * (init / B0) + gamma * (cross / B) - conj / B +
                    lambda * (sp.u * tau_mean - sp.u - sp.u * sp.u / 2.0);
    out.grad.tau = zero_grad(sp.tau);
    out.grad.f = zero_grad(sp.f);
    out.grad.u = lambda * (tau_mean - 1.0 - sp.u);
    out.tau_mean = tau_mean;
    for (std::size_t j = 0; j < tv.size(); ++j) {
        out.dJ_dscale += c_tau[j] * tv[j];
        c_tau[j] *= tau_scale;
    }
    tau_b.accumulate(c_tau, out.grad.tau);
    f_b.accumulate(c_f, out.grad.f);
    return out;
}

inline SaddleGrad gradients(const SaddleParams& sp, const SaddleBatch& batch, const GenDiceConfig& cfg) {
    return objective_and_gradients(sp, batch, cfg).grad;
}

}  // namespace gendice
