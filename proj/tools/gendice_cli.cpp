// Command-line runner for the off-line PageRank, taxi OPE and ablation experiments.

#include "gendice/gendice.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct Args {
    std::string config;
    std::string out = ".";
    std::optional<std::size_t> seeds;
    std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, Args& a) {
    cmd->add_option("--config", a.config, "INI configuration file (defaults apply when omitted)");
    cmd->add_option("--out", a.out, "output directory")->capture_default_str();
    cmd->add_option("--seeds", a.seeds, "number of seeds (overrides the config)")->check(CLI::PositiveNumber);
    cmd->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

gendice::ExperimentConfig resolve(const Args& a, gendice::Task forced, bool forced_is_ablation) {
    auto cfg = a.config.empty() ? gendice::ExperimentConfig{} : gendice::load_config(a.config);
    if (forced_is_ablation) {
        if (a.config.empty() || !gendice::is_ablation(cfg.task)) cfg.task = forced;
    } else {
        cfg.task = forced;
    }
    if (a.seeds) cfg.n_seeds = *a.seeds;
    cfg.validate();
    return cfg;
}

int run(const Args& a, gendice::ExperimentConfig cfg) {
    fs::create_directories(a.out);
    {
        std::ofstream rc(fs::path(a.out) / "resolved.cfg");
        gendice::write_config(cfg, rc);
    }
    const auto result = gendice::run_experiment(cfg, {a.jobs});
    {
        std::ofstream csv(fs::path(a.out) / "results.csv");
        gendice::write_csv(csv, result.records);
    }
    if (cfg.write_traces)
        for (std::size_t k = 0; k < result.traces.size(); ++k) {
            if (result.traces[k].empty()) continue;
            std::ofstream tr(fs::path(a.out) / ("trace_" + std::to_string(k) + ".csv"));
            gendice::write_trace_csv(tr, result.traces[k]);
        }
    for (const auto& r : result.records)
        if (!r.seed && r.metric.size() > 5 && r.metric.compare(r.metric.size() - 5, 5, "_mean") == 0)
            std::cout << r.task << ' ' << r.method << " n=" << r.n_samples
                      << (r.alpha ? " alpha=" + gendice::format_value(*r.alpha) : "")
                      << (r.gamma ? " gamma=" + gendice::format_value(*r.gamma) : "") << ' ' << r.metric << ' '
                      << gendice::format_value(r.value) << '\n';
        else if (!r.seed && r.metric == "log_mse")
            std::cout << r.task << ' ' << r.method << " len=" << r.n_samples << " alpha="
                      << gendice::format_value(*r.alpha) << " gamma=" << gendice::format_value(*r.gamma)
                      << " log_mse " << gendice::format_value(r.value) << '\n';
    std::size_t diverged = 0;
    for (const auto& r : result.records)
        if (r.seed && r.metric == "diverged_at_step") ++diverged;
    if (diverged > 0) {
        std::cerr << "numerical divergence: " << diverged << " training run(s) aborted, see diverged_at_step rows\n";
        return kExitDivergence;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GenDICE stationary-ratio experiments"};
    app.require_subcommand(1);
    Args opr_args, taxi_args, abl_args;
    std::string ablate_factor;
    auto* opr = app.add_subcommand("opr", "off-line PageRank on a BA or loaded graph");
    add_common(opr, opr_args);
    auto* taxi = app.add_subcommand("ope-taxi", "off-policy evaluation on the taxi MDP");
    add_common(taxi, taxi_args);
    auto* abl = app.add_subcommand("ablate", "one-factor ablation of trained GenDICE");
    add_common(abl, abl_args);
    abl->add_option("--factor", ablate_factor, "lambda | divergence | activation | penalty");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        if (opr->parsed()) return run(opr_args, resolve(opr_args, gendice::Task::opr, false));
        if (taxi->parsed()) return run(taxi_args, resolve(taxi_args, gendice::Task::ope_taxi, false));
        auto task = gendice::Task::ablation_lambda;
        if (!ablate_factor.empty()) task = gendice::task_by_name("ablation-" + ablate_factor);
        auto cfg = resolve(abl_args, task, ablate_factor.empty());
        return run(abl_args, cfg);
    } catch (const gendice::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const gendice::NumericalDivergence& e) {
        std::cerr << "numerical divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
