#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gendice {

using Vec = Eigen::VectorXd;
using SparseRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs that violate a documented precondition (shapes, ranges, probabilities).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Evaluation outside the domain of a convex conjugate.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Training produced non-finite or exploding values.
class NumericalDivergence : public Error {
public:
    NumericalDivergence(const std::string& what, long step)
        : Error(what + " at step " + std::to_string(step)), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Malformed configuration or input file.
class ConfigError : public Error {
public:
    using Error::Error;
};

inline constexpr double kStochasticTol = 1e-12;

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

inline bool is_distribution(std::span<const double> p, double tol) {
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) return false;
        s += v;
    }
    return std::abs(s - 1.0) <= tol;
}

inline Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

/// Probability vector over states or state-action pairs.
class Distribution {
public:
    Distribution() = default;
    explicit Distribution(std::vector<double> probs, double tol = 1e-10) : probs_(std::move(probs)) {
        detail::require(!probs_.empty(), "distribution must be non-empty");
        detail::require(detail::is_distribution(probs_, tol), "distribution must be non-negative and sum to 1");
    }

    static Distribution uniform(std::size_t n) {
        return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }
    static Distribution point_mass(std::size_t n, std::size_t at) {
        std::vector<double> p(n, 0.0);
        p.at(at) = 1.0;
        return Distribution(std::move(p));
    }
    /// Renormalizes a non-negative vector with positive mass.
    static Distribution normalized(std::vector<double> w) {
        double s = 0.0;
        for (double& v : w) {
            detail::require(v >= 0.0 && std::isfinite(v), "weights must be finite and non-negative");
            s += v;
        }
        detail::require(s > 0.0, "weights must have positive mass");
        for (double& v : w) v /= s;
        return Distribution(std::move(w));
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    const std::vector<double>& probs() const noexcept { return probs_; }
    Vec vec() const { return detail::to_vec(probs_); }

private:
    std::vector<double> probs_;
};

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size(), "l1_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

}  // namespace gendice
