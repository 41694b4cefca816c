#pragma once

#include "gendice/common.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace gendice {

/// One CSV row. Optional fields are written empty when they do not apply; `seed` is
/// empty for aggregates over seeds.
struct MetricRecord {
    std::string task;
    std::string method;
    std::optional<std::uint64_t> seed;
    std::size_t n_samples = 0;
    std::optional<double> alpha;
    std::optional<double> gamma;
    std::optional<double> lambda;
    std::string metric;
    double value = 0.0;

    bool operator==(const MetricRecord&) const = default;
};

inline constexpr const char* kCsvHeader = "task,method,seed,n_samples,alpha,gamma,lambda,metric,value";

/// Shortest round-tripping form; -inf / inf / nan are spelled out.
inline std::string format_value(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

inline void write_csv(std::ostream& out, const std::vector<MetricRecord>& rows) {
    out << kCsvHeader << '\n';
    auto opt = [](const std::optional<double>& v) { return v ? format_value(*v) : std::string(); };
    for (const auto& r : rows)
        out << r.task << ',' << r.method << ',' << (r.seed ? std::to_string(*r.seed) : std::string()) << ','
            << r.n_samples << ',' << opt(r.alpha) << ',' << opt(r.gamma) << ',' << opt(r.lambda) << ',' << r.metric
            << ',' << format_value(r.value) << '\n';
}

/// log KL(truth || estimate) with the estimate floored at 1e-12; -inf when the divergence
/// is zero.
inline double log_kl(std::span<const double> estimated, std::span<const double> truth) {
    detail::require(estimated.size() == truth.size(), "log_kl: dimension mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] > 0.0) kl += truth[i] * std::log(truth[i] / std::max(estimated[i], 1e-12));
    if (kl <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(kl);
}

inline double log_kl(const Distribution& estimated, const Distribution& truth) {
    return log_kl(estimated.probs(), truth.probs());
}

/// log of the mean squared error of `estimates` around `truth`; -inf when it is zero.
inline double log_mse(std::span<const double> estimates, double truth) {
    detail::require(!estimates.empty(), "log_mse: no estimates");
    double s = 0.0;
    for (double e : estimates) s += (e - truth) * (e - truth);
    s /= static_cast<double>(estimates.size());
    if (s <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(s);
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  ///< population standard deviation
};

inline MeanStd mean_std(std::span<const double> v) {
    detail::require(!v.empty(), "mean_std: no values");
    MeanStd r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (!std::isfinite(r.mean)) {
        r.std = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    for (double x : v) r.std += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(r.std / static_cast<double>(v.size()));
    return r;
}

/// Adds `<metric>_mean` and `<metric>_std` rows (seed left empty) for every group of
/// per-seed rows sharing all fields except seed and value, in first-appearance order.
inline std::vector<MetricRecord> aggregate_over_seeds(const std::vector<MetricRecord>& rows) {
    using Key = std::tuple<std::string, std::string, std::size_t, std::string, std::string, std::string, std::string>;
    auto key_of = [](const MetricRecord& r) {
        auto o = [](const std::optional<double>& v) { return v ? format_value(*v) : std::string(); };
        return Key{r.task, r.method, r.n_samples, o(r.alpha), o(r.gamma), o(r.lambda), r.metric};
    };
    std::map<Key, std::size_t> index;
    std::vector<std::pair<MetricRecord, std::vector<double>>> groups;
    for (const auto& r : rows) {
        if (!r.seed) continue;
        const auto k = key_of(r);
        auto it = index.find(k);
        if (it == index.end()) {
            it = index.emplace(k, groups.size()).first;
            groups.push_back({r, {}});
        }
        groups[it->second].second.push_back(r.value);
    }
    std::vector<MetricRecord> out;
    for (auto& [proto, values] : groups) {
        const auto ms = mean_std(values);
        MetricRecord m = proto;
        m.seed.reset();
        m.metric = proto.metric + "_mean";
        m.value = ms.mean;
        out.push_back(m);
        m.metric = proto.metric + "_std";
        m.value = ms.std;
        out.push_back(m);
    }
    return out;
}

}  // namespace gendice
