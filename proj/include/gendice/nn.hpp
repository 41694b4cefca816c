#pragma once

#include "gendice/common.hpp"
#include "gendice/random.hpp"

#include <string>
#include <vector>

namespace gendice {

/// Final nonlinearity of a network or tabular function. `square`, `softplus` and `exp` keep
/// the output non-negative; `below_log2` maps onto (-inf, log 2), the conjugate domain of JS.
enum class OutputHead { identity, square, softplus, exp, below_log2 };

inline std::string to_string(OutputHead h) {
    switch (h) {
        case OutputHead::identity: return "identity";
        case OutputHead::square: return "square";
        case OutputHead::softplus: return "softplus";
        case OutputHead::exp: return "exp";
        case OutputHead::below_log2: return "below_log2";
    }
    return "?";
}

inline OutputHead head_by_name(const std::string& name) {
    if (name == "identity") return OutputHead::identity;
    if (name == "square") return OutputHead::square;
    if (name == "softplus") return OutputHead::softplus;
    if (name == "exp") return OutputHead::exp;
    if (name == "below_log2") return OutputHead::below_log2;
    throw ConfigError("unknown output head '" + name + "' (expected square | softplus | exp | identity)");
}

namespace detail {
inline double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace detail

inline double apply_head(OutputHead h, double z) {
    switch (h) {
        case OutputHead::identity: return z;
        case OutputHead::square: return z * z;
        case OutputHead::softplus: return detail::softplus(z);
        case OutputHead::exp: return std::exp(z);
        case OutputHead::below_log2: return std::log(2.0) - detail::softplus(-z);
    }
    return z;
}

inline double head_derivative(OutputHead h, double z) {
    switch (h) {
        case OutputHead::identity: return 1.0;
        case OutputHead::square: return 2.0 * z;
        case OutputHead::softplus: return detail::sigmoid(z);
        case OutputHead::exp: return std::exp(z);
        case OutputHead::below_log2: return detail::sigmoid(-z);
    }
    return 1.0;
}

/// Pre-activation that makes the head output `value` (used to start tabular functions at a
/// chosen constant).
inline double head_preimage(OutputHead h, double value) {
    switch (h) {
        case OutputHead::identity: return value;
        case OutputHead::square:
            detail::require(value >= 0.0, "square head cannot produce negative values");
            return std::sqrt(value);
        case OutputHead::softplus:
            detail::require(value > 0.0, "softplus head needs a positive value");
            return std::log(std::expm1(value));
        case OutputHead::exp:
            detail::require(value > 0.0, "exp head needs a positive value");
            return std::log(value);
        case OutputHead::below_log2:
            detail::require(value < std::log(2.0), "below_log2 head needs a value below log 2");
            return -std::log(std::expm1(std::log(2.0) - value));
    }
    return value;
}

/// Feed-forward network: affine -> tanh for each hidden layer, then affine -> head.
/// weights[l] is n_out x n_in.
struct MlpParams {
    std::vector<std::size_t> layer_sizes;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Vec> biases;
    OutputHead head = OutputHead::identity;

    std::size_t n_layers() const { return weights.size(); }
    std::size_t input_size() const { return layer_sizes.front(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
        return n;
    }

    /// Same shapes, all zeros.
    MlpParams zeros_like() const {
        MlpParams z{layer_sizes, {}, {}, head};
        for (std::size_t l = 0; l < weights.size(); ++l) {
            z.weights.push_back(Eigen::MatrixXd::Zero(weights[l].rows(), weights[l].cols()));
            z.biases.push_back(Vec::Zero(biases[l].size()));
        }
        return z;
    }

    void set_zero() {
        for (auto& w : weights) w.setZero();
        for (auto& b : biases) b.setZero();
    }

    /// Visits every scalar parameter together with the matching entry of `other` and a flat
    /// index (weights of layer 0, biases of layer 0, weights of layer 1, ...).
    template <class Fn>
    void zip(const MlpParams& other, Fn&& fn) {
        std::size_t k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            double* w = weights[l].data();
            const double* o = other.weights[l].data();
            for (Eigen::Index i = 0; i < weights[l].size(); ++i) fn(w[i], o[i], k++);
            double* b = biases[l].data();
            const double* ob = other.biases[l].data();
            for (Eigen::Index i = 0; i < biases[l].size(); ++i) fn(b[i], ob[i], k++);
        }
    }

    bool operator==(const MlpParams& o) const {
        if (layer_sizes != o.layer_sizes || head != o.head || weights.size() != o.weights.size()) return false;
        for (std::size_t l = 0; l < weights.size(); ++l)
            if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
        return true;
    }
};

inline void validate(const MlpParams& p) {
    detail::require(p.layer_sizes.size() >= 2, "MLP needs at least an input and an output layer");
    detail::require(p.layer_sizes.back() == 1, "MLP output layer must have size 1");
    detail::require(p.weights.size() + 1 == p.layer_sizes.size() && p.biases.size() == p.weights.size(),
                    "MLP layer count mismatch");
    for (std::size_t l = 0; l < p.weights.size(); ++l)
        detail::require(static_cast<std::size_t>(p.weights[l].cols()) == p.layer_sizes[l] &&
                            static_cast<std::size_t>(p.weights[l].rows()) == p.layer_sizes[l + 1] &&
                            static_cast<std::size_t>(p.biases[l].size()) == p.layer_sizes[l + 1],
                        "MLP layer " + std::to_string(l) + " has inconsistent shape");
}

/// Weights uniform in +-sqrt(6 / (n_in + n_out)), biases zero.
inline MlpParams mlp_init(const std::vector<std::size_t>& layer_sizes, OutputHead head, std::uint64_t seed) {
    detail::require(layer_sizes.size() >= 2 && layer_sizes.back() == 1, "mlp_init: sizes must end with 1");
    for (auto n : layer_sizes) detail::require(n > 0, "mlp_init: layer sizes must be positive");
    Rng rng(seed);
    MlpParams p{layer_sizes, {}, {}, head};
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const auto nin = layer_sizes[l], nout = layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(nin + nout));
        Eigen::MatrixXd w(static_cast<Eigen::Index>(nout), static_cast<Eigen::Index>(nin));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
        p.weights.push_back(std::move(w));
        p.biases.push_back(Vec::Zero(static_cast<Eigen::Index>(nout)));
    }
    return p;
}

namespace detail {

/// First-layer affine map that skips zero inputs (one-hot features are the common case).
inline Vec first_affine(const MlpParams& p, std::span<const double> x) {
    Vec z = p.biases[0];
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) z += x[i] * p.weights[0].col(static_cast<Eigen::Index>(i));
    return z;
}

struct ForwardTrace {
    std::vector<Vec> activations;  ///< post-tanh outputs of each hidden layer
    double pre_head = 0.0;
    double output = 0.0;
};

inline ForwardTrace forward_trace(const MlpParams& p, std::span<const double> x) {
    require(x.size() == p.input_size(), "MLP input has wrong length");
    ForwardTrace t;
    const auto L = p.n_layers();
    Vec z = first_affine(p, x);
    for (std::size_t l = 1; l < L; ++l) {
        Vec h = z.array().tanh();
        t.activations.push_back(h);
        z = p.weights[l] * h + p.biases[l];
    }
    t.pre_head = z[0];
    t.output = apply_head(p.head, t.pre_head);
    return t;
}

}  // namespace detail

inline double mlp_forward(const MlpParams& p, std::span<const double> x) {
    return detail::forward_trace(p, x).output;
}

/// Adds upstream * d(output)/d(params) into `grad` and returns the forward output.
inline double mlp_accumulate_grad(const MlpParams& p, std::span<const double> x, double upstream, MlpParams& grad) {
    const auto t = detail::forward_trace(p, x);
    if (upstream == 0.0) return t.output;
    const auto L = p.n_layers();
    Vec delta(1);
    delta[0] = upstream * head_derivative(p.head, t.pre_head);
    for (std::size_t l = L; l-- > 0;) {
        grad.biases[l] += delta;
        if (l == 0) {
            for (std::size_t i = 0; i < x.size(); ++i)
                if (x[i] != 0.0) grad.weights[0].col(static_cast<Eigen::Index>(i)) += x[i] * delta;
        } else {
            const Vec& h = t.activations[l - 1];
            grad.weights[l].noalias() += delta * h.transpose();
            Vec back = p.weights[l].transpose() * delta;
            delta = back.array() * (1.0 - h.array().square());
        }
    }
    return t.output;
}

namespace detail {

/// Column-batched forward pass; X holds one input per column.
struct BatchTrace {
    std::vector<Eigen::MatrixXd> activations;
    Eigen::RowVectorXd pre_head;
    std::vector<double> output;
};

/// X holds one input per column; it may be dense or sparse.
template <class Input>
BatchTrace forward_batch(const MlpParams& p, const Input& X) {
    require(static_cast<std::size_t>(X.rows()) == p.input_size(), "MLP input has wrong length");
    BatchTrace t;
    const auto L = p.n_layers();
    Eigen::MatrixXd Z = p.weights[0] * X;
    Z.colwise() += p.biases[0];
    for (std::size_t l = 1; l < L; ++l) {
        Eigen::MatrixXd H = Z.array().tanh();
        Z = p.weights[l] * H;
        Z.colwise() += p.biases[l];
        t.activations.push_back(std::move(H));
    }
    t.pre_head = Z.row(0);
    t.output.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) t.output[static_cast<std::size_t>(j)] = apply_head(p.head, t.pre_head[j]);
    return t;
}

/// Adds sum_j upstream[j] * d(output_j)/d(params) into `grad` given a forward trace.
template <class Input>
void backward_batch(const MlpParams& p, const Input& X, const BatchTrace& t, std::span<const double> upstream,
                    MlpParams& grad) {
    const auto k = X.cols();
    require(static_cast<std::size_t>(k) == upstream.size(), "MLP upstream has wrong length");
    Eigen::MatrixXd delta(1, k);
    for (Eigen::Index j = 0; j < k; ++j)
        delta(0, j) = upstream[static_cast<std::size_t>(j)] * head_derivative(p.head, t.pre_head[j]);
    for (std::size_t l = p.n_layers(); l-- > 0;) {
        if (l == 0)
            grad.weights[0] += delta * X.transpose();
        else
            grad.weights[l].noalias() += delta * t.activations[l - 1].transpose();
        grad.biases[l] += delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = p.weights[l].transpose() * delta;
            delta = back.array() * (1.0 - t.activations[l - 1].array().square());
        }
    }
}

}  // namespace detail

/// Gradient of upstream * mlp_forward(p, x) with respect to every weight and bias.
inline MlpParams mlp_grad(const MlpParams& p, std::span<const double> x, double upstream) {
    MlpParams g = p.zeros_like();
    mlp_accumulate_grad(p, x, upstream, g);
    return g;
}

}  // namespace gendice
