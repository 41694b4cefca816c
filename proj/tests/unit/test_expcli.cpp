#include "helpers.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gendice;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string csv_of(const std::vector<MetricRecord>& rows) {
    std::ostringstream out;
    write_csv(out, rows);
    return out.str();
}

ExperimentConfig small_opr() {
    return parse(R"([experiment]
task = opr
seeds = 2
base_seed = 5
[gendice]
param = tabular
lr_tau = 0.05
lr_f = 0.05
lr_u = 0.05
batch_size = 64
steps = 40
[opr]
n_vertices = 20
m = 2
m0 = 3
sample_sizes = 100, 300
)");
}

const MetricRecord* find(const std::vector<MetricRecord>& rows, const std::string& method, const std::string& metric,
                         std::size_t n) {
    for (const auto& r : rows)
        if (r.method == method && r.metric == metric && r.n_samples == n) return &r;
    return nullptr;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("gendice_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GENDICE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, ParsesEverySection) {
    const auto c = parse(R"([experiment]
task = ope-taxi
seeds = 7
[gendice]
lambda = 0.5
divergence = js
optimizer = adaptive
hidden = 32, 16
tau_head = softplus
[taxi]
gammas = 0.9, 1
alphas = 0.33
lengths = 50
methods = gendice, wis
[ablation]
n_samples = 123
)");
    EXPECT_EQ(c.task, Task::ope_taxi);
    EXPECT_EQ(c.n_seeds, 7u);
    EXPECT_EQ(c.gendice.lambda, 0.5);
    EXPECT_EQ(c.gendice.divergence.name, "js");
    EXPECT_EQ(c.gendice.optimizer, Optimizer::adaptive);
    EXPECT_EQ(c.gendice.hidden, (std::vector<std::size_t>{32, 16}));
    EXPECT_EQ(c.gendice.tau_head, OutputHead::softplus);
    EXPECT_EQ(c.taxi.gammas, (std::vector<double>{0.9, 1.0}));
    EXPECT_EQ(c.taxi.methods, (std::vector<std::string>{"gendice", "wis"}));
    EXPECT_EQ(c.ablation.n_samples, 123u);
}

TEST(Config, RoundTripsThroughWriter) {
    auto c = small_opr();
    c.gendice.divergence = kl();
    c.taxi.alphas = {0.25, 0.75};
    std::ostringstream a;
    write_config(c, a);
    const auto back = parse(a.str());
    std::ostringstream b;
    write_config(back, b);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(back.opr.sample_sizes, c.opr.sample_sizes);
    EXPECT_EQ(back.gendice.lr_tau, 0.05);
}

TEST(Config, RejectsUnknownAndInvalidEntries) {
    EXPECT_THROW(parse("[experiment]\ncolour = red\n"), ConfigError);
    EXPECT_THROW(parse("[nowhere]\nx = 1\n"), ConfigError);
    EXPECT_THROW(parse("[experiment]\nseeds = many\n"), ConfigError);
    EXPECT_THROW(parse("[experiment]\nseeds = 0\n"), ConfigError);
    EXPECT_THROW(parse("[experiment]\ntask = regression\n"), ConfigError);
    EXPECT_THROW(parse("[gendice]\nlambda = 0\n"), ConfigError);
    EXPECT_THROW(parse("[gendice]\ndivergence = hellinger\n"), ConfigError);
    EXPECT_THROW(parse("[taxi]\nalphas = 1.5\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/gendice.ini"), ConfigError);
}

TEST(Config, AblationDefaultsPerFactor) {
    ExperimentConfig c;
    c.task = Task::ablation_divergence;
    EXPECT_EQ(c.ablation_values(), (std::vector<std::string>{"chi2", "kl", "js"}));
    c.task = Task::ablation_penalty;
    EXPECT_EQ(c.ablation_values(), (std::vector<std::string>{"on", "off"}));
    c.ablation.values = {"0.3"};
    EXPECT_EQ(c.ablation_values(), (std::vector<std::string>{"0.3"}));
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, LogKl) {
    EXPECT_EQ(log_kl(Distribution({0.2, 0.8}), Distribution({0.2, 0.8})), -std::numeric_limits<double>::infinity());
    const double direct = 0.5 * std::log(0.5 / 0.7) + 0.5 * std::log(0.5 / 0.3);
    EXPECT_NEAR(log_kl(Distribution({0.7, 0.3}), Distribution({0.5, 0.5})), std::log(direct), 1e-14);
    // estimate floored at 1e-12 where the truth has mass
    const double floored = 0.5 * std::log(0.5 / 1e-12) + 0.5 * std::log(0.5 / 1.0);
    EXPECT_NEAR(log_kl(Distribution({0.0, 1.0}), Distribution({0.5, 0.5})), std::log(floored), 1e-12);
}

TEST(Metrics, LogMse) {
    EXPECT_EQ(log_mse(std::vector<double>{2.0, 2.0}, 2.0), -std::numeric_limits<double>::infinity());
    EXPECT_EQ(log_mse(std::vector<double>{1.0, 3.0}, 2.0), 0.0);
    EXPECT_NEAR(log_mse(std::vector<double>{2.5}, 2.0), std::log(0.25), 1e-15);
    EXPECT_THROW(log_mse(std::vector<double>{}, 1.0), InvalidArgument);
}

TEST(Metrics, MeanStdAndAggregation) {
    const auto ms = mean_std(std::vector<double>{1.0, 3.0});
    EXPECT_EQ(ms.mean, 2.0);
    EXPECT_EQ(ms.std, 1.0);
    EXPECT_TRUE(std::isnan(mean_std(std::vector<double>{1.0, -std::numeric_limits<double>::infinity()}).std));
    std::vector<MetricRecord> rows = {
        {"opr", "a", 0, 100, std::nullopt, 1.0, 1.0, "log_kl", -1.0},
        {"opr", "b", 0, 100, std::nullopt, 1.0, std::nullopt, "log_kl", -5.0},
        {"opr", "a", 1, 100, std::nullopt, 1.0, 1.0, "log_kl", -3.0},
        {"opr", "a", 0, 200, std::nullopt, 1.0, 1.0, "log_kl", -4.0},
    };
    const auto agg = aggregate_over_seeds(rows);
    ASSERT_EQ(agg.size(), 6u);
    EXPECT_EQ(agg[0].method, "a");
    EXPECT_EQ(agg[0].metric, "log_kl_mean");
    EXPECT_EQ(agg[0].value, -2.0);
    EXPECT_EQ(agg[1].metric, "log_kl_std");
    EXPECT_EQ(agg[1].value, 1.0);
    EXPECT_FALSE(agg[0].seed.has_value());
    EXPECT_EQ(agg[2].method, "b");
    EXPECT_EQ(agg[4].n_samples, 200u);
}

TEST(Metrics, CsvSchema) {
    const std::vector<MetricRecord> rows = {
        {"opr", "gendice", 3, 100, std::nullopt, 1.0, 1.0, "log_kl", -std::numeric_limits<double>::infinity()},
        {"ope-taxi", "wis", std::nullopt, 200, 0.33, 0.99, std::nullopt, "log_mse", -2.5},
    };
    EXPECT_EQ(csv_of(rows),
              "task,method,seed,n_samples,alpha,gamma,lambda,metric,value\n"
              "opr,gendice,3,100,,1,1,log_kl,-inf\n"
              "ope-taxi,wis,,200,0.33000000000000002,0.98999999999999999,,log_mse,-2.5\n");
    EXPECT_EQ(format_value(0.1), "0.10000000000000001");
    EXPECT_EQ(std::stod(format_value(0.1)), 0.1);
}

TEST(Metrics, DerivedSeedsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t base : {0, 1})
        for (std::uint64_t stream = 0; stream < 4; ++stream)
            for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(base, stream, i));
    EXPECT_EQ(seen.size(), 400u);
    EXPECT_EQ(derive_seed(7, 2, 3), derive_seed(7, 2, 3));
}

// ---------------------------------------------------------------- runners

TEST(RunOpr, DeterministicAndThreadCountInvariant) {
    const auto c = small_opr();
    const auto a = run_opr(c), b = run_opr(c, {2});
    EXPECT_EQ(csv_of(a.records), csv_of(b.records));
    for (const std::string m : {"gendice", "gendice-exact", "model-based", "self-normalized"}) {
        EXPECT_NE(find(a.records, m, "log_kl", 100), nullptr) << m;
        EXPECT_NE(find(a.records, m, "log_kl_mean", 300), nullptr) << m;
    }
    EXPECT_NE(find(a.records, "gendice", "tau_mean", 300), nullptr);
    ASSERT_EQ(a.traces.size(), 2u);
    EXPECT_EQ(a.traces[0].size(), 40u);
    auto other = c;
    other.base_seed = 6;
    EXPECT_NE(csv_of(run_opr(other).records), csv_of(a.records));
}

TEST(RunOpr, TwoNodeGraphConverges) {
    const auto dir = scratch("two_node");
    {
        std::ofstream g(dir / "pair.txt");
        g << "a b\nb a\n";
    }
    auto c = small_opr();
    c.n_seeds = 1;
    c.opr.graph_file = (dir / "pair.txt").string();
    c.opr.sample_sizes = {1000000};
    c.opr.methods = {"gendice-exact", "model-based"};
    const auto run = run_opr(c);
    EXPECT_LT(find(run.records, "gendice-exact", "log_kl", 1000000)->value, -10.0);
    EXPECT_LT(find(run.records, "model-based", "log_kl", 1000000)->value, -10.0);
}

TEST(RunOpr, UnknownMethodIsConfigError) {
    auto c = small_opr();
    c.opr.methods = {"oracle"};
    EXPECT_THROW(run_opr(c), ConfigError);
}

TEST(RunOpr, DivergentTrainingIsRecordedNotFatal) {
    auto c = small_opr();
    c.n_seeds = 1;
    c.opr.sample_sizes = {100};
    c.opr.methods = {"gendice"};
    c.gendice.divergence = kl();
    c.gendice.lr_tau = c.gendice.lr_f = c.gendice.lr_u = 200.0;
    const auto run = run_opr(c);
    const auto* d = find(run.records, "gendice", "diverged_at_step", 100);
    ASSERT_NE(d, nullptr);
    EXPECT_EQ(find(run.records, "gendice", "log_kl", 100)->value, std::numeric_limits<double>::infinity());
}

TEST(RunOpeTaxi, SmallRunProducesScoredCells) {
    const auto c = parse(R"([experiment]
task = ope-taxi
seeds = 2
[taxi]
gammas = 0.9, 1
alphas = 0.5
lengths = 40, 80
n_trajectories = 4
target_episodes = 60
base_episodes = 30
methods = gendice, gendice-cloned, model-based, wis
)");
    const auto run = run_ope_taxi(c);
    std::size_t log_mse_rows = 0, truth_rows = 0;
    for (const auto& r : run.records) {
        if (r.metric == "log_mse") {
            ++log_mse_rows;
            EXPECT_FALSE(r.seed.has_value());
            EXPECT_TRUE(std::isfinite(r.value)) << r.method;
        }
        if (r.metric == "truth") ++truth_rows;
    }
    EXPECT_EQ(log_mse_rows, 4u * 2u * 2u);
    EXPECT_EQ(truth_rows, 2u);
    EXPECT_EQ(csv_of(run.records), csv_of(run_ope_taxi(c).records));
}

TEST(RunAblation, PenaltyCells) {
    auto c = small_opr();
    c.task = Task::ablation_penalty;
    c.n_seeds = 1;
    c.ablation.n_samples = 200;
    const auto run = run_ablation(c);
    const auto* on = find(run.records, "penalty=on", "tau_mean", 200);
    const auto* off = find(run.records, "penalty=off", "tau_mean", 200);
    ASSERT_NE(on, nullptr);
    ASSERT_NE(off, nullptr);
    EXPECT_EQ(*on->lambda, 1.0);
    EXPECT_EQ(*off->lambda, 0.0);
    c.task = Task::opr;
    EXPECT_THROW(run_ablation(c), ConfigError);
    c.task = Task::ablation_lambda;
    c.ablation.values = {"-1"};
    EXPECT_THROW(run_ablation(c), ConfigError);
}

// ---------------------------------------------------------------- command line

TEST(Cli, ExitCodesAndOutputs) {
    const auto dir = scratch("cli");
    {
        std::ofstream ok(dir / "ok.ini");
        write_config(small_opr(), ok);
        std::ofstream bad(dir / "bad.ini");
        bad << "[gendice]\nlearning_rate = 0.1\n";
        auto div = small_opr();
        div.n_seeds = 1;
        div.opr.sample_sizes = {100};
        div.opr.methods = {"gendice"};
        div.gendice.divergence = kl();
        div.gendice.lr_tau = div.gendice.lr_f = div.gendice.lr_u = 200.0;
        std::ofstream dv(dir / "div.ini");
        write_config(div, dv);
    }
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("opr --config " + (dir / "ok.ini").string() + " --out " + (dir / "ok").string() + " --jobs 2"), 0);
    EXPECT_TRUE(fs::exists(dir / "ok" / "results.csv"));
    EXPECT_TRUE(fs::exists(dir / "ok" / "resolved.cfg"));
    EXPECT_EQ(load_config((dir / "ok" / "resolved.cfg").string()).opr.n_vertices, 20u);
    EXPECT_EQ(run_cli("opr --config " + (dir / "bad.ini").string() + " --out " + (dir / "bad").string()), 2);
    EXPECT_EQ(run_cli("opr --seeds 0"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli("opr --config " + (dir / "div.ini").string() + " --out " + (dir / "div").string()), 3);
    EXPECT_TRUE(fs::exists(dir / "div" / "results.csv"));
}
