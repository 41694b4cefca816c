#pragma once

#include "gendice/common.hpp"
#include "gendice/nn.hpp"

#include <memory>
#include <variant>
#include <vector>

namespace gendice {

/// Dense feature rows, one per unit (state or state-action pair).
class FeatureTable {
public:
    FeatureTable(std::size_t n_units, std::size_t dim, std::vector<double> data)
        : n_units_(n_units), dim_(dim), data_(std::move(data)) {
        detail::require(data_.size() == n_units_ * dim_, "feature table has wrong size");
    }

    /// One-hot state concatenated with one-hot action.
    static FeatureTable one_hot(std::size_t n_states, std::size_t n_actions) {
        const auto dim = n_states + (n_actions > 1 ? n_actions : 0);
        std::vector<double> d(n_states * n_actions * dim, 0.0);
        for (std::size_t s = 0; s < n_states; ++s)
            for (std::size_t a = 0; a < n_actions; ++a) {
                const auto x = s * n_actions + a;
                d[x * dim + s] = 1.0;
                if (n_actions > 1) d[x * dim + n_states + a] = 1.0;
            }
        return FeatureTable(n_states * n_actions, dim, std::move(d));
    }

    std::size_t n_units() const noexcept { return n_units_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> row(std::size_t x) const { return {data_.data() + x * dim_, dim_}; }

private:
    std::size_t n_units_;
    std::size_t dim_;
    std::vector<double> data_;
};

/// One free parameter per unit passed through an output head.
struct TabularFunction {
    std::vector<double> theta;
    OutputHead head = OutputHead::identity;

    static TabularFunction constant(std::size_t n_units, OutputHead head, double value) {
        return {std::vector<double>(n_units, head_preimage(head, value)), head};
    }
    bool operator==(const TabularFunction&) const = default;
};

/// Network over a shared feature table.
struct MlpFunction {
    MlpParams params;
    std::shared_ptr<const FeatureTable> features;

    bool operator==(const MlpFunction& o) const { return params == o.params && features == o.features; }
};

using FunctionModel = std::variant<TabularFunction, MlpFunction>;

/// Gradient storage shaped like the model's parameters.
using ModelGrad = std::variant<std::vector<double>, MlpParams>;

inline std::size_t n_units(const FunctionModel& m) {
    return std::visit(
        [](const auto& f) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(f)>, TabularFunction>)
                return f.theta.size();
            else
                return f.features->n_units();
        },
        m);
}

inline double evaluate(const FunctionModel& m, std::size_t x) {
    if (const auto* t = std::get_if<TabularFunction>(&m)) return apply_head(t->head, t->theta[x]);
    const auto& n = std::get<MlpFunction>(m);
    return mlp_forward(n.params, n.features->row(x));
}

inline std::vector<double> evaluate_all(const FunctionModel& m) {
    std::vector<double> v(n_units(m));
    for (std::size_t x = 0; x < v.size(); ++x) v[x] = evaluate(m, x);
    return v;
}

inline ModelGrad zero_grad(const FunctionModel& m) {
    if (const auto* t = std::get_if<TabularFunction>(&m)) return std::vector<double>(t->theta.size(), 0.0);
    return std::get<MlpFunction>(m).params.zeros_like();
}

/// grad += coeff * d value(x) / d params.
inline void accumulate_grad(const FunctionModel& m, std::size_t x, double coeff, ModelGrad& grad) {
    if (const auto* t = std::get_if<TabularFunction>(&m)) {
        std::get<std::vector<double>>(grad)[x] += coeff * head_derivative(t->head, t->theta[x]);
        return;
    }
    const auto& n = std::get<MlpFunction>(m);
    mlp_accumulate_grad(n.params, n.features->row(x), coeff, std::get<MlpParams>(grad));
}

/// Visits (parameter, gradient entry, flat index) triples.
template <class Fn>
void zip_params(FunctionModel& m, const ModelGrad& g, Fn&& fn) {
    if (auto* t = std::get_if<TabularFunction>(&m)) {
        const auto& gv = std::get<std::vector<double>>(g);
        for (std::size_t i = 0; i < t->theta.size(); ++i) fn(t->theta[i], gv[i], i);
        return;
    }
    std::get<MlpFunction>(m).params.zip(std::get<MlpParams>(g), fn);
}

template <class Fn>
void for_each_grad(const ModelGrad& g, Fn&& fn) {
    if (const auto* v = std::get_if<std::vector<double>>(&g)) {
        for (double x : *v) fn(x);
        return;
    }
    const auto& p = std::get<MlpParams>(g);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) fn(p.weights[l].data()[i]);
        for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) fn(p.biases[l].data()[i]);
    }
}

inline std::size_t parameter_count(const FunctionModel& m) {
    if (const auto* t = std::get_if<TabularFunction>(&m)) return t->theta.size();
    return std::get<MlpFunction>(m).params.parameter_count();
}

/// Values of a model on a fixed list of units, keeping what the backward pass needs.
class UnitBatch {
public:
    UnitBatch(const FunctionModel& m, std::vector<std::size_t> units) : model_(&m), units_(std::move(units)) {
        if (const auto* t = std::get_if<TabularFunction>(&m)) {
            values_.reserve(units_.size());
            for (auto x : units_) values_.push_back(apply_head(t->head, t->theta.at(x)));
            return;
        }
        const auto& n = std::get<MlpFunction>(m);
        const auto dim = static_cast<Eigen::Index>(n.features->dim());
        std::vector<Triplet> trips;
        for (std::size_t j = 0; j < units_.size(); ++j) {
            detail::require(units_[j] < n.features->n_units(), "unit index out of range");
            const auto row = n.features->row(units_[j]);
            for (Eigen::Index i = 0; i < dim; ++i)
                if (const double v = row[static_cast<std::size_t>(i)]; v != 0.0)
                    trips.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
        }
        X_.resize(dim, static_cast<Eigen::Index>(units_.size()));
        X_.setFromTriplets(trips.begin(), trips.end());
        trace_ = detail::forward_batch(n.params, X_);
        values_ = trace_.output;
    }

    const std::vector<std::size_t>& units() const noexcept { return units_; }
    const std::vector<double>& values() const noexcept { return values_; }

    /// grad += sum_j coeffs[j] * d value(units[j]) / d params.
    void accumulate(std::span<const double> coeffs, ModelGrad& grad) const {
        detail::require(coeffs.size() == units_.size(), "UnitBatch: one coefficient per unit expected");
        if (const auto* t = std::get_if<TabularFunction>(model_)) {
            auto& g = std::get<std::vector<double>>(grad);
            for (std::size_t j = 0; j < units_.size(); ++j)
                g[units_[j]] += coeffs[j] * head_derivative(t->head, t->theta[units_[j]]);
            return;
        }
        if (units_.empty()) return;
        detail::backward_batch(std::get<MlpFunction>(*model_).params, X_, trace_, coeffs, std::get<MlpParams>(grad));
    }

private:
    const FunctionModel* model_;
    std::vector<std::size_t> units_;
    std::vector<double> values_;
    Eigen::SparseMatrix<double> X_;
    detail::BatchTrace trace_;
};

/// Learnable triple of the min-max objective: the ratio tau (non-negative head), the dual
/// function f and the scalar u dual to the normalization constraint.
struct SaddleParams {
    FunctionModel tau;
    FunctionModel f;
    double u = 0.0;

    bool operator==(const SaddleParams&) const = default;
};

}  // namespace gendice
