#pragma once

#include "gendice/common.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace gendice {

/// f-divergence generator phi together with its Fenchel conjugate phi*.
struct FDivergence {
    std::string name;
    std::function<double(double)> phi;
    std::function<double(double)> phi_star;
    std::function<double(double)> phi_star_deriv;
    /// argmax_y { r y - phi*(y) } = phi'(r), when available in closed form.
    std::function<double(double)> closed_form_dual;
    /// phi* is finite only for y < conjugate_sup (infinity when unrestricted).
    double conjugate_sup = std::numeric_limits<double>::infinity();

    bool in_conjugate_domain(double y) const { return y < conjugate_sup; }

    double conjugate(double y) const {
        if (!in_conjugate_domain(y))
            throw DomainError(name + " conjugate evaluated at " + std::to_string(y) + ", outside y < " +
                              std::to_string(conjugate_sup));
        return phi_star(y);
    }
    double conjugate_deriv(double y) const {
        if (!in_conjugate_domain(y))
            throw DomainError(name + " conjugate derivative evaluated at " + std::to_string(y) + ", outside y < " +
                              std::to_string(conjugate_sup));
        return phi_star_deriv(y);
    }
};

namespace detail {
inline double xlogx(double x) { return x == 0.0 ? 0.0 : x * std::log(x); }
}  // namespace detail

/// phi(x) = (x - 1)^2, phi*(y) = y + y^2 / 4.
inline FDivergence chi_squared() {
    return FDivergence{
        "chi2",
        [](double x) { return (x - 1.0) * (x - 1.0); },
        [](double y) { return y + y * y / 4.0; },
        [](double y) { return 1.0 + y / 2.0; },
        [](double r) { return 2.0 * (r - 1.0); },
    };
}

/// phi(x) = x log x, phi*(y) = exp(y - 1).
inline FDivergence kl() {
    return FDivergence{
        "kl",
        [](double x) { return detail::xlogx(x); },
        [](double y) { return std::exp(y - 1.0); },
        [](double y) { return std::exp(y - 1.0); },
        [](double r) { return 1.0 + std::log(r); },
    };
}

/// Jensen-Shannon generator phi(x) = x log x - (x + 1) log((x + 1) / 2),
/// phi*(y) = -log(2 - e^y) on y < log 2.
inline FDivergence js() {
    return FDivergence{
        "js",
        [](double x) { return detail::xlogx(x) - (x + 1.0) * std::log((x + 1.0) / 2.0); },
        [](double y) { return -std::log(2.0 - std::exp(y)); },
        [](double y) { return std::exp(y) / (2.0 - std::exp(y)); },
        [](double r) { return std::log(2.0 * r / (r + 1.0)); },
        std::log(2.0),
    };
}

inline FDivergence divergence_by_name(const std::string& name) {
    if (name == "chi2") return chi_squared();
    if (name == "kl") return kl();
    if (name == "js") return js();
    throw ConfigError("unknown divergence '" + name + "' (expected chi2 | kl | js)");
}

/// D_phi(q || p) = sum_i p_i phi(q_i / p_i), with 0 phi(0/0) = 0. Returns +infinity when q
/// puts mass where p has none.
inline double eval_divergence(const FDivergence& div, std::span<const double> q, std::span<const double> p) {
    detail::require(q.size() == p.size(), "eval_divergence: dimension mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) {
            if (q[i] != 0.0) return std::numeric_limits<double>::infinity();
            continue;
        }
        d += p[i] * div.phi(q[i] / p[i]);
    }
    return d;
}

inline double eval_divergence(const FDivergence& div, const Distribution& q, const Distribution& p) {
    return eval_divergence(div, q.probs(), p.probs());
}

}  // namespace gendice
