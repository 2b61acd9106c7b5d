// End-to-end tests of the gridfreq binary: workflow wiring, reproducibility
// and the exit-code contract. Kept at desk scale; the statistical claims
// live in the acceptance suite.

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef GRIDFREQ_CLI_PATH
#error "GRIDFREQ_CLI_PATH must be defined"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
    const std::string cmd =
        std::string(GRIDFREQ_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream file(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(file), {});
}

json read_json(const fs::path& path) {
    json doc;
    std::ifstream(path) >> doc;
    return doc;
}

class CliFlow : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / "gridfreq_cli_flow";
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        ASSERT_EQ(run("synth-data --out " + (dir_ / "data").string() +
                      " --seed 3 --days 4"),
                  0);
        ASSERT_EQ(run("train --features " + (dir_ / "data/features.csv").string() +
                      " --feature-manifest " +
                      (dir_ / "data/feature_manifest.json").string() +
                      " --frequency " + (dir_ / "data/frequency.csv").string() +
                      " --out " + (dir_ / "bundle").string() +
                      " --epochs 3 --units 10 --hidden 1 --lr 1e-2 --batch-size 96"
                      " --t-max 120 --seed 5"),
                  0);
    }
    static fs::path dir_;
    static std::string data_args() {
        return " --features " + (dir_ / "data/features.csv").string() +
               " --feature-manifest " + (dir_ / "data/feature_manifest.json").string() +
               " --frequency " + (dir_ / "data/frequency.csv").string();
    }
};

fs::path CliFlow::dir_;

}  // namespace

TEST_F(CliFlow, TrainProducesBundleArtifacts) {
    for (const char* name : {"weights.json", "normalizer.json", "config.json",
                             "history.json", "dataset.json", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir_ / "bundle" / name)) << name;
    }
    const json manifest = read_json(dir_ / "bundle/manifest.json");
    EXPECT_EQ(manifest.at("command"), "train");
    EXPECT_EQ(manifest.at("seed"), 5);
    EXPECT_GE(manifest.at("inputs").size(), 3u);
    EXPECT_TRUE(manifest.contains("config_hash"));
}

TEST_F(CliFlow, PredictWritesMetrics) {
    ASSERT_EQ(run("predict --bundle " + (dir_ / "bundle").string() + data_args() +
                  " --out " + (dir_ / "pred").string() + " --t-max 120"),
              0);
    const json metrics = read_json(dir_ / "pred/metrics.json");
    EXPECT_EQ(metrics.at("split"), "test");
    EXPECT_EQ(metrics.at("t_max"), 120.0);
    EXPECT_TRUE(metrics.contains("median_nll"));
    EXPECT_TRUE(metrics.contains("q25_nll"));
    EXPECT_TRUE(metrics.contains("q75_nll"));
    EXPECT_LE(metrics.at("q25_nll").get<double>(),
              metrics.at("median_nll").get<double>());
}

TEST_F(CliFlow, SynthesizeIsByteReproducible) {
    const std::string args = "synthesize --bundle " + (dir_ / "bundle").string() +
                             " --features " + (dir_ / "data/features.csv").string() +
                             " --feature-manifest " +
                             (dir_ / "data/feature_manifest.json").string() +
                             " --days 1 --seed 7 --out ";
    ASSERT_EQ(run(args + (dir_ / "syn").string()), 0);
    fs::rename(dir_ / "syn", dir_ / "syn_first");
    ASSERT_EQ(run(args + (dir_ / "syn").string()), 0);
    EXPECT_EQ(slurp(dir_ / "syn_first/trajectory.csv"),
              slurp(dir_ / "syn/trajectory.csv"));
    EXPECT_EQ(slurp(dir_ / "syn_first/manifest.json"),
              slurp(dir_ / "syn/manifest.json"));
    // one day at dt = 0.1 covers 96 intervals * 9000 samples
    std::ifstream traj(dir_ / "syn/trajectory.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(traj, line)) ++lines;
    EXPECT_EQ(lines, 864001u);  // header + samples
}

TEST_F(CliFlow, DayAheadOnlyUsesFewerColumns) {
    ASSERT_EQ(run("train" + data_args() + " --out " + (dir_ / "bundle_da").string() +
                  " --epochs 1 --units 8 --hidden 1 --batch-size 96 --t-max 60"
                  " --day-ahead-only"),
              0);
    ASSERT_EQ(run("predict --bundle " + (dir_ / "bundle_da").string() + data_args() +
                  " --out " + (dir_ / "pred_da").string() +
                  " --t-max 60 --day-ahead-only"),
              0);
    const json full = read_json(dir_ / "bundle/dataset.json");
    const json da = read_json(dir_ / "bundle_da/dataset.json");
    EXPECT_LT(da.at("feature_names").size(), full.at("feature_names").size());
    const json manifest = read_json(dir_ / "pred_da/manifest.json");
    EXPECT_EQ(manifest.at("config").at("feature_columns_used").size(),
              da.at("feature_names").size());
    // a full-feature predict against the day-ahead bundle must fail cleanly
    EXPECT_EQ(run("predict --bundle " + (dir_ / "bundle").string() + data_args() +
                  " --out " + (dir_ / "pred_mismatch").string() +
                  " --t-max 60 --day-ahead-only"),
              2);
}

TEST_F(CliFlow, IdentifyEmitsParameterSeries) {
    ASSERT_EQ(run("identify --bundle " + (dir_ / "bundle").string() + data_args() +
                  " --out " + (dir_ / "ident").string()),
              0);
    std::ifstream params(dir_ / "ident/params.csv");
    std::string header;
    std::getline(params, header);
    EXPECT_EQ(header, "timestamp,tau,kappa,D,q,r,sigma_theta0,sigma_omega0,cov0");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(params, line)) ++rows;
    EXPECT_EQ(rows, 384u);  // all 4 days fit at the bundle's t_max = 120 s
    EXPECT_TRUE(fs::exists(dir_ / "ident/daily_params.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "ident/reference_ratios.json"));
}

TEST_F(CliFlow, ConfigFileDefaultsAndFlagOverrides) {
    const fs::path cfg_path = dir_ / "run_config.json";
    std::ofstream(cfg_path) << R"({"days": 2, "seed": 11})";
    ASSERT_EQ(run("--config " + cfg_path.string() + " synth-data --out " +
                  (dir_ / "cfgdata").string()),
              0);
    std::ifstream truth(dir_ / "cfgdata/truth.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(truth, line)) ++rows;
    EXPECT_EQ(rows, 1u + 192u);  // config file: 2 days
    // explicit flag wins over the config file
    ASSERT_EQ(run("--config " + cfg_path.string() + " synth-data --out " +
                  (dir_ / "cfgdata2").string() + " --days 1"),
              0);
    std::ifstream truth2(dir_ / "cfgdata2/truth.csv");
    rows = 0;
    while (std::getline(truth2, line)) ++rows;
    EXPECT_EQ(rows, 1u + 96u);
}

TEST(CliErrors, ExitCodes) {
    EXPECT_EQ(run("predict --bundle /nonexistent --features /nope.csv "
                  "--frequency /nope2.csv --out /tmp/gridfreq_err_out"),
              3);  // data error
    EXPECT_EQ(run("definitely-not-a-command"), 2);
    EXPECT_EQ(run("synth-data"), 2);  // missing required --out
    EXPECT_EQ(run("--config /does/not/exist.json synth-data --out /tmp/x"), 2);
}

TEST(CliBenchmark, ModelBeatsDailyProfileEndToEnd) {
    // full workflow on a dataset large enough for a calibrated profile
    const fs::path dir = fs::temp_directory_path() / "gridfreq_cli_bench";
    fs::remove_all(dir);
    fs::create_directories(dir);
    ASSERT_EQ(run("synth-data --out " + (dir / "data").string() +
                  " --seed 12 --days 16"),
              0);
    const std::string data_args =
        " --features " + (dir / "data/features.csv").string() +
        " --feature-manifest " + (dir / "data/feature_manifest.json").string() +
        " --frequency " + (dir / "data/frequency.csv").string();
    ASSERT_EQ(run("train" + data_args + " --out " + (dir / "bundle").string() +
                  " --epochs 12 --units 16 --hidden 1 --lr 1e-2 --batch-size 256"
                  " --t-max 240 --seed 2 --threads 2 --train-frac 0.75"
                  " --val-frac 0.1"),
              0);
    ASSERT_EQ(run("benchmark --bundle " + (dir / "bundle").string() + data_args +
                  " --out " + (dir / "bench").string() + " --t-max-grid 240"),
              0);
    const json rows = read_json(dir / "bench/benchmark.json");
    ASSERT_EQ(rows.size(), 1u);
    const double model = rows[0].at("model_median_nll").get<double>();
    const double profile = rows[0].at("profile_median_nll").get<double>();
    EXPECT_LT(model, profile);
    EXPECT_LT(rows[0].at("relative_loss_increase_vs_profile").get<double>(), 0.0);
    fs::remove_all(dir);
}
