#pragma once

#include "gendice/common.hpp"
#include "gendice/estimator/objective.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gendice {

enum class Task { opr, ope_taxi, ablation_lambda, ablation_divergence, ablation_activation, ablation_penalty };

inline std::string to_string(Task t) {
    switch (t) {
        case Task::opr: return "opr";
        case Task::ope_taxi: return "ope-taxi";
        case Task::ablation_lambda: return "ablation-lambda";
        case Task::ablation_divergence: return "ablation-divergence";
        case Task::ablation_activation: return "ablation-activation";
        case Task::ablation_penalty: return "ablation-penalty";
    }
    return "?";
}

inline Task task_by_name(const std::string& s) {
    for (auto t : {Task::opr, Task::ope_taxi, Task::ablation_lambda, Task::ablation_divergence,
                   Task::ablation_activation, Task::ablation_penalty})
        if (to_string(t) == s) return t;
    throw ConfigError("unknown task '" + s + "'");
}

inline bool is_ablation(Task t) { return t != Task::opr && t != Task::ope_taxi; }

struct OprSettings {
    std::size_t n_vertices = 100;
    std::size_t m = 4;
    std::size_t m0 = 5;
    double eta = 0.1;
    bool weighted = false;
    std::string graph_file;  ///< edge list; overrides the generated graph when set
    std::vector<std::size_t> sample_sizes{100, 200, 500, 1000, 2000, 5000, 10000, 20000};
    std::vector<std::string> methods{"gendice", "gendice-exact", "model-based", "self-normalized"};
    double smoothing = 0.0;
};

struct TaxiSettings {
    std::size_t grid = 5;
    double appear_prob = 0.05;
    std::vector<double> gammas{1.0};
    std::vector<double> alphas{0.0, 0.33, 0.66, 1.0};
    std::vector<std::size_t> lengths{200, 400, 1000, 2000};  ///< approximate grid
    std::size_t n_trajectories = 100;
    long target_episodes = 1000;
    long base_episodes = 950;
    double q_lr = 0.1;
    double q_epsilon = 0.1;
    double q_final_epsilon = 0.01;
    double q_gamma = 0.99;
    double policy_epsilon = 0.1;
    std::uint64_t policy_seed = 0;  ///< target/base policies are shared by all seeds
    std::vector<std::string> methods{"gendice", "model-based", "wis"};
    double smoothing = 0.0;
};

struct AblationSettings {
    std::size_t n_samples = 10000;
    std::vector<std::string> values;  ///< empty: the default grid of the ablated factor
};

struct ExperimentConfig {
    Task task = Task::opr;
    std::size_t n_seeds = 20;
    std::uint64_t base_seed = 0;
    bool write_traces = false;
    GenDiceConfig gendice;
    OprSettings opr;
    TaxiSettings taxi;
    AblationSettings ablation;

    std::vector<std::string> ablation_values() const {
        if (!ablation.values.empty()) return ablation.values;
        switch (task) {
            case Task::ablation_lambda: return {"0.1", "0.5", "1", "2", "5"};
            case Task::ablation_divergence: return {"chi2", "kl", "js"};
            case Task::ablation_activation: return {"square", "softplus", "exp"};
            case Task::ablation_penalty: return {"on", "off"};
            default: return {};
        }
    }

    void validate() const {
        if (n_seeds < 1) throw ConfigError("n_seeds must be at least 1");
        try {
            gendice.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("[gendice] ") + e.what());
        }
        if (task == Task::opr && opr.sample_sizes.empty()) throw ConfigError("[opr] sample_sizes is empty");
        if (task == Task::ope_taxi && (taxi.gammas.empty() || taxi.alphas.empty() || taxi.lengths.empty()))
            throw ConfigError("[taxi] gammas, alphas and lengths must be non-empty");
        for (double a : taxi.alphas)
            if (a < 0.0 || a > 1.0) throw ConfigError("[taxi] alphas must lie in [0, 1]");
        for (double g : taxi.gammas)
            if (g <= 0.0 || g > 1.0) throw ConfigError("[taxi] gammas must lie in (0, 1]");
        if (taxi.base_episodes > taxi.target_episodes) throw ConfigError("[taxi] base_episodes exceeds target_episodes");
        if (opr.eta < 0.0 || opr.eta >= 1.0) throw ConfigError("[opr] eta must lie in [0, 1)");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_value(const std::string& key, const std::string& raw) {
    std::istringstream in(trim(raw));
    T v{};
    in >> v;
    if (in.fail() || !in.eof()) throw ConfigError("cannot parse '" + raw + "' for key " + key);
    return v;
}

template <>
inline bool parse_value<bool>(const std::string& key, const std::string& raw) {
    const auto s = trim(raw);
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ConfigError("cannot parse '" + raw + "' as a boolean for key " + key);
}

template <>
inline std::string parse_value<std::string>(const std::string&, const std::string& raw) {
    return trim(raw);
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
    std::vector<T> out;
    for (const auto& item : split_list(raw)) out.push_back(parse_value<T>(key, item));
    return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    return out.str();
}

inline std::string num(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace detail

/// Reads an INI file: [experiment], [gendice], [opr], [taxi], [ablation]. Unknown sections
/// and keys are errors.
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    ExperimentConfig c;
    using Setter = std::function<void(const std::string&)>;
    const std::map<std::string, std::map<std::string, Setter>> keys{
        {"experiment",
         {{"task", [&](const std::string& v) { c.task = task_by_name(detail::trim(v)); }},
          {"seeds", [&](const std::string& v) { c.n_seeds = detail::parse_value<std::size_t>("seeds", v); }},
          {"base_seed", [&](const std::string& v) { c.base_seed = detail::parse_value<std::uint64_t>("base_seed", v); }},
          {"write_traces", [&](const std::string& v) { c.write_traces = detail::parse_value<bool>("write_traces", v); }}}},
        {"gendice",
         {{"lambda", [&](const std::string& v) { c.gendice.lambda = detail::parse_value<double>("lambda", v); }},
          {"divergence", [&](const std::string& v) { c.gendice.divergence = divergence_by_name(detail::trim(v)); }},
          {"penalty", [&](const std::string& v) { c.gendice.penalty = detail::parse_value<bool>("penalty", v); }},
          {"lr_tau", [&](const std::string& v) { c.gendice.lr_tau = detail::parse_value<double>("lr_tau", v); }},
          {"lr_f", [&](const std::string& v) { c.gendice.lr_f = detail::parse_value<double>("lr_f", v); }},
          {"lr_u", [&](const std::string& v) { c.gendice.lr_u = detail::parse_value<double>("lr_u", v); }},
          {"batch_size",
           [&](const std::string& v) { c.gendice.batch_size = detail::parse_value<std::size_t>("batch_size", v); }},
          {"steps", [&](const std::string& v) { c.gendice.steps = detail::parse_value<long>("steps", v); }},
          {"tau_head", [&](const std::string& v) { c.gendice.tau_head = head_by_name(detail::trim(v)); }},
          {"f_head", [&](const std::string& v) { c.gendice.f_head = head_by_name(detail::trim(v)); }},
          {"param", [&](const std::string& v) { c.gendice.param = parameterization_by_name(detail::trim(v)); }},
          {"hidden", [&](const std::string& v) { c.gendice.hidden = detail::parse_list<std::size_t>("hidden", v); }},
          {"optimizer", [&](const std::string& v) { c.gendice.optimizer = optimizer_by_name(detail::trim(v)); }},
          {"adaptive_decay",
           [&](const std::string& v) { c.gendice.adaptive_decay = detail::parse_value<double>("adaptive_decay", v); }},
          {"abort_threshold",
           [&](const std::string& v) { c.gendice.abort_threshold = detail::parse_value<double>("abort_threshold", v); }}}},
        {"opr",
         {{"n_vertices", [&](const std::string& v) { c.opr.n_vertices = detail::parse_value<std::size_t>("n_vertices", v); }},
          {"m", [&](const std::string& v) { c.opr.m = detail::parse_value<std::size_t>("m", v); }},
          {"m0", [&](const std::string& v) { c.opr.m0 = detail::parse_value<std::size_t>("m0", v); }},
          {"eta", [&](const std::string& v) { c.opr.eta = detail::parse_value<double>("eta", v); }},
          {"weighted", [&](const std::string& v) { c.opr.weighted = detail::parse_value<bool>("weighted", v); }},
          {"graph_file", [&](const std::string& v) { c.opr.graph_file = detail::trim(v); }},
          {"sample_sizes",
           [&](const std::string& v) { c.opr.sample_sizes = detail::parse_list<std::size_t>("sample_sizes", v); }},
          {"methods", [&](const std::string& v) { c.opr.methods = detail::split_list(v); }},
          {"smoothing", [&](const std::string& v) { c.opr.smoothing = detail::parse_value<double>("smoothing", v); }}}},
        {"taxi",
         {{"grid", [&](const std::string& v) { c.taxi.grid = detail::parse_value<std::size_t>("grid", v); }},
          {"appear_prob", [&](const std::string& v) { c.taxi.appear_prob = detail::parse_value<double>("appear_prob", v); }},
          {"gammas", [&](const std::string& v) { c.taxi.gammas = detail::parse_list<double>("gammas", v); }},
          {"alphas", [&](const std::string& v) { c.taxi.alphas = detail::parse_list<double>("alphas", v); }},
          {"lengths", [&](const std::string& v) { c.taxi.lengths = detail::parse_list<std::size_t>("lengths", v); }},
          {"n_trajectories",
           [&](const std::string& v) { c.taxi.n_trajectories = detail::parse_value<std::size_t>("n_trajectories", v); }},
          {"target_episodes",
           [&](const std::string& v) { c.taxi.target_episodes = detail::parse_value<long>("target_episodes", v); }},
          {"base_episodes",
           [&](const std::string& v) { c.taxi.base_episodes = detail::parse_value<long>("base_episodes", v); }},
          {"q_lr", [&](const std::string& v) { c.taxi.q_lr = detail::parse_value<double>("q_lr", v); }},
          {"q_epsilon", [&](const std::string& v) { c.taxi.q_epsilon = detail::parse_value<double>("q_epsilon", v); }},
          {"q_final_epsilon",
           [&](const std::string& v) { c.taxi.q_final_epsilon = detail::parse_value<double>("q_final_epsilon", v); }},
          {"q_gamma", [&](const std::string& v) { c.taxi.q_gamma = detail::parse_value<double>("q_gamma", v); }},
          {"policy_epsilon",
           [&](const std::string& v) { c.taxi.policy_epsilon = detail::parse_value<double>("policy_epsilon", v); }},
          {"policy_seed",
           [&](const std::string& v) { c.taxi.policy_seed = detail::parse_value<std::uint64_t>("policy_seed", v); }},
          {"methods", [&](const std::string& v) { c.taxi.methods = detail::split_list(v); }},
          {"smoothing", [&](const std::string& v) { c.taxi.smoothing = detail::parse_value<double>("smoothing", v); }}}},
        {"ablation",
         {{"n_samples", [&](const std::string& v) { c.ablation.n_samples = detail::parse_value<std::size_t>("n_samples", v); }},
          {"values", [&](const std::string& v) { c.ablation.values = detail::split_list(v); }}}},
    };
    for (const auto& [section, body] : tree) {
        const auto sec = keys.find(section);
        if (sec == keys.end()) {
            if (body.empty()) throw ConfigError(source + ": key '" + section + "' outside any section");
            throw ConfigError(source + ": unknown section [" + section + "]");
        }
        for (const auto& [key, value] : body) {
            const auto k = sec->second.find(key);
            if (k == sec->second.end()) throw ConfigError(source + ": unknown key '" + key + "' in [" + section + "]");
            try {
                k->second(value.data());
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw ConfigError(source + ": [" + section + "] " + key + ": " + e.what());
            }
        }
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in, path);
}

/// Writes every setting, so that parse_config(write_config(c)) reproduces c.
inline void write_config(const ExperimentConfig& c, std::ostream& out) {
    using detail::join;
    using detail::num;
    const auto& g = c.gendice;
    out << "[experiment]\n"
        << "task = " << to_string(c.task) << "\nseeds = " << c.n_seeds << "\nbase_seed = " << c.base_seed
        << "\nwrite_traces = " << (c.write_traces ? "true" : "false") << "\n\n";
    out << "[gendice]\n"
        << "lambda = " << num(g.lambda) << "\ndivergence = " << g.divergence.name
        << "\npenalty = " << (g.penalty ? "true" : "false") << "\nlr_tau = " << num(g.lr_tau)
        << "\nlr_f = " << num(g.lr_f) << "\nlr_u = " << num(g.lr_u) << "\nbatch_size = " << g.batch_size
        << "\nsteps = " << g.steps << "\ntau_head = " << to_string(g.tau_head) << "\nf_head = " << to_string(g.f_head)
        << "\nparam = " << to_string(g.param) << "\nhidden = " << join(g.hidden)
        << "\noptimizer = " << to_string(g.optimizer) << "\nadaptive_decay = " << num(g.adaptive_decay)
        << "\nabort_threshold = " << num(g.abort_threshold) << "\n\n";
    out << "[opr]\n"
        << "n_vertices = " << c.opr.n_vertices << "\nm = " << c.opr.m << "\nm0 = " << c.opr.m0
        << "\neta = " << num(c.opr.eta) << "\nweighted = " << (c.opr.weighted ? "true" : "false")
        << "\ngraph_file = " << c.opr.graph_file << "\nsample_sizes = " << join(c.opr.sample_sizes)
        << "\nmethods = " << join(c.opr.methods) << "\nsmoothing = " << num(c.opr.smoothing) << "\n\n";
    const auto& t = c.taxi;
    out << "[taxi]\n"
        << "grid = " << t.grid << "\nappear_prob = " << num(t.appear_prob) << "\ngammas = " << join(t.gammas)
        << "\nalphas = " << join(t.alphas) << "\nlengths = " << join(t.lengths)
        << "\nn_trajectories = " << t.n_trajectories << "\ntarget_episodes = " << t.target_episodes
        << "\nbase_episodes = " << t.base_episodes << "\nq_lr = " << num(t.q_lr) << "\nq_epsilon = " << num(t.q_epsilon)
        << "\nq_final_epsilon = " << num(t.q_final_epsilon) << "\nq_gamma = " << num(t.q_gamma)
        << "\npolicy_epsilon = " << num(t.policy_epsilon) << "\npolicy_seed = " << t.policy_seed
        << "\nmethods = " << join(t.methods) << "\nsmoothing = " << num(t.smoothing) << "\n\n";
    out << "[ablation]\n"
        << "n_samples = " << c.ablation.n_samples << "\nvalues = " << join(c.ablation_values()) << "\n";
}

}  // namespace gendice
