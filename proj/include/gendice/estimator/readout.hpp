#pragma once

#include "gendice/common.hpp"
#include "gendice/dataset.hpp"
#include "gendice/estimator/model.hpp"

#include <ostream>
#include <vector>

namespace gendice {

/// tau evaluated on every unit, times an optional scale.
inline std::vector<double> tau_table(const FunctionModel& tau, double scale = 1.0) {
    auto v = evaluate_all(tau);
    for (double& x : v) x *= scale;
    return v;
}

/// Per-record ratios tau(s_i, a_i) for a unit table.
inline std::vector<double> record_ratios(const std::vector<double>& tau_units, const TransitionDataset& data) {
    detail::require(tau_units.size() == data.n_units(), "record_ratios: tau table has wrong size");
    std::vector<double> r(data.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = tau_units[data.unit(data[i])];
    return r;
}

/// tau_i / mean_D(tau).
inline std::vector<double> self_normalized(const std::vector<double>& tau_records, const TransitionDataset& data) {
    detail::require(!tau_records.empty(), "self_normalized: no ratios");
    detail::require(tau_records.size() == data.size(), "self_normalized: one ratio per record expected");
    double m = 0.0;
    for (double t : tau_records) m += t;
    m /= static_cast<double>(tau_records.size());
    if (!(m > 0.0)) throw InvalidArgument("self_normalized: mean ratio is not positive");
    std::vector<double> out(tau_records);
    for (double& t : out) t /= m;
    return out;
}

/// Unit-table version: tau(x) / sum_x p-hat(x) tau(x).
inline std::vector<double> self_normalized_table(const std::vector<double>& tau_units, const TransitionDataset& data) {
    const auto p = data.empirical_unit_distribution();
    detail::require(tau_units.size() == p.size(), "self_normalized_table: tau table has wrong size");
    double m = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) m += p[x] * tau_units[x];
    if (!(m > 0.0)) throw InvalidArgument("self_normalized: mean ratio is not positive");
    std::vector<double> out(tau_units);
    for (double& t : out) t /= m;
    return out;
}

/// mean_i tau(s_i, a_i) r_i.
inline double estimate_policy_value(const std::vector<double>& tau_units, const TransitionDataset& data) {
    detail::require(tau_units.size() == data.n_units(), "estimate_policy_value: tau table has wrong size");
    detail::require(!data.empty(), "estimate_policy_value: dataset is empty");
    double v = 0.0;
    for (const auto& r : data.records()) v += tau_units[data.unit(r)] * r.reward;
    return v / static_cast<double>(data.size());
}

/// d-hat(v) proportional to sum_a p-hat(v, a) tau(v, a); vertices absent from the data get 0.
inline Distribution estimate_pagerank(const std::vector<double>& tau_units, const TransitionDataset& data) {
    detail::require(tau_units.size() == data.n_units(), "estimate_pagerank: tau table has wrong size");
    const auto p = data.empirical_unit_distribution();
    std::vector<double> d(data.n_states(), 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) d[x / data.n_actions()] += p[x] * std::max(tau_units[x], 0.0);
    double s = 0.0;
    for (double v : d) s += v;
    if (!(s > 0.0)) throw InvalidArgument("estimate_pagerank: p-hat * tau is identically zero");
    return Distribution::normalized(std::move(d));
}

/// CSV "state,tau" (one action) or "state,action,tau".
inline void write_tau_csv(std::ostream& out, const std::vector<double>& tau_units, std::size_t n_actions) {
    out.precision(17);
    if (n_actions == 1) {
        out << "state,tau\n";
        for (std::size_t x = 0; x < tau_units.size(); ++x) out << x << ',' << tau_units[x] << '\n';
        return;
    }
    out << "state,action,tau\n";
    for (std::size_t x = 0; x < tau_units.size(); ++x)
        out << x / n_actions << ',' << x % n_actions << ',' << tau_units[x] << '\n';
}

inline void write_trace_csv(std::ostream& out, const std::vector<double>& trace) {
    out.precision(17);
    out << "step,J\n";
    for (std::size_t t = 0; t < trace.size(); ++t) out << t << ',' << trace[t] << '\n';
}

}  // namespace gendice
