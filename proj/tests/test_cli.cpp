#include "connlatent/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;
const std::string kCli = CONNLATENT_CLI_PATH;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& name = "") const { return (path / name).string(); }
};

int run_cli(const std::string& args, const std::string& log) {
    const std::string cmd = kCli + " " + args + " >" + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

void make_fixture(const TempDir& dir, int subjects = 220) {
    const int rc = run_cli("synth --subjects " + std::to_string(subjects) +
                               " --sites 3 --features 24 --signal-features 5 --site-shift 0.4"
                               " --effect-size 1.5 --seed 7 --metadata-out " +
                               dir.str("meta.csv") + " --features-out " + dir.str("feats.bin"),
                           dir.str("synth.log"));
    ASSERT_EQ(rc, 0);
}

const std::string kSmallRunArgs =
    " --set dvae.epochs=12 --set dvae.hidden_dims=24,12 --set grid.svm_c=0.1,1"
    " --set grid.svm_gamma=0.1 --set grid.rf_trees=20 --set grid.rf_depth=3 --set threads=2";

}  // namespace

TEST(Cli, SynthAndRunProduceReports) {
    TempDir dir("connlatent_cli_run");
    make_fixture(dir);
    const int rc = run_cli("run --preset paper-latent --metadata " + dir.str("meta.csv") + " --features " +
                               dir.str("feats.bin") + " --output-dir " + dir.str("out") + " --seed 5" +
                               kSmallRunArgs,
                           dir.str("run.log"));
    EXPECT_EQ(rc, 0);
    EXPECT_TRUE(fs::exists(dir.str("out/metrics.csv")));
    EXPECT_TRUE(fs::exists(dir.str("out/manifest.json")));
    const std::string log = connlatent::read_text_file(dir.str("run.log"));
    EXPECT_NE(log.find("svm:"), std::string::npos);
    EXPECT_NE(log.find("rf:"), std::string::npos);
}

TEST(Cli, ConfigErrorExitsTwo) {
    TempDir dir("connlatent_cli_cfg");
    make_fixture(dir, 60);
    const int rc = run_cli("run --metadata " + dir.str("meta.csv") + " --features " + dir.str("feats.bin") +
                               " --output-dir " + dir.str("out") + " --set split.folds=1",
                           dir.str("run.log"));
    EXPECT_EQ(rc, 2);
}

TEST(Cli, MissingDataExitsThree) {
    TempDir dir("connlatent_cli_data");
    const int rc = run_cli("run --metadata " + dir.str("absent.csv") + " --features " + dir.str("nope.bin") +
                               " --output-dir " + dir.str("out"),
                           dir.str("run.log"));
    EXPECT_EQ(rc, 3);
}

TEST(Cli, SeedEnvironmentVariableIsLowestPrecedenceOverride) {
    TempDir dir("connlatent_cli_env");
    make_fixture(dir);
    setenv("CONNLATENT_SEED", "909", 1);
    int rc = run_cli("run --preset paper-latent --metadata " + dir.str("meta.csv") + " --features " +
                         dir.str("feats.bin") + " --output-dir " + dir.str("out_env") + kSmallRunArgs,
                     dir.str("run.log"));
    ASSERT_EQ(rc, 0);
    std::string manifest = connlatent::read_text_file(dir.str("out_env/manifest.json"));
    EXPECT_NE(manifest.find("\"seed\": 909"), std::string::npos);

    // --set beats the environment
    rc = run_cli("run --preset paper-latent --metadata " + dir.str("meta.csv") + " --features " +
                     dir.str("feats.bin") + " --output-dir " + dir.str("out_set") + " --set seed=11" +
                     kSmallRunArgs,
                 dir.str("run.log"));
    unsetenv("CONNLATENT_SEED");
    ASSERT_EQ(rc, 0);
    manifest = connlatent::read_text_file(dir.str("out_set/manifest.json"));
    EXPECT_NE(manifest.find("\"seed\": 11"), std::string::npos);
}

TEST(Cli, VectorizeTrainExtractChain) {
    TempDir dir("connlatent_cli_chain");
    // two subjects of 5-ROI time series -> 15 features each
    connlatent::Matrix ts(20, 5);
    for (connlatent::Index r = 0; r < 20; ++r)
        for (connlatent::Index c = 0; c < 5; ++c) ts(r, c) = std::sin(0.1 * (r + 1) * (c + 1));
    connlatent::write_matrix_csv(dir.str("ts1.csv"), ts, 10);
    connlatent::write_matrix_csv(dir.str("ts2.csv"), (ts.array() * 1.3 + 0.1).matrix(), 10);

    int rc = run_cli("vectorize " + dir.str("ts1.csv") + " " + dir.str("ts2.csv") + " --output " +
                         dir.str("vec.bin"),
                     dir.str("vec.log"));
    ASSERT_EQ(rc, 0);
    const auto vec = connlatent::read_feature_matrix(dir.str("vec.bin"));
    EXPECT_EQ(vec.rows(), 2);
    EXPECT_EQ(vec.cols(), 15);

    // train a tiny DVAE on replicated rows, then extract
    connlatent::Matrix many(40, 15);
    for (connlatent::Index i = 0; i < 40; ++i) many.row(i) = vec.row(i % 2);
    connlatent::write_feature_matrix_binary(dir.str("many.bin"), many);
    rc = run_cli("train-dvae --features " + dir.str("many.bin") + " --epochs 5 --batch-size 8 --hidden 8,4" +
                     " --latent 2 --model-out " + dir.str("model.bin") + " --curve-out " + dir.str("curve.csv"),
                 dir.str("train.log"));
    ASSERT_EQ(rc, 0);
    rc = run_cli("extract --model " + dir.str("model.bin") + " --features " + dir.str("many.bin") +
                     " --output " + dir.str("latents.csv"),
                 dir.str("extract.log"));
    ASSERT_EQ(rc, 0);
    const auto latents = connlatent::read_matrix_csv(dir.str("latents.csv"));
    EXPECT_EQ(latents.rows(), 40);
    EXPECT_EQ(latents.cols(), 4);
}

TEST(Cli, HarmonizeRoundTrip) {
    TempDir dir("connlatent_cli_harm");
    make_fixture(dir, 150);
    const int rc = run_cli("harmonize --metadata " + dir.str("meta.csv") + " --features " +
                               dir.str("feats.bin") + " --adjusted-out " + dir.str("adj.bin") +
                               " --model-out " + dir.str("cmb.bin"),
                           dir.str("harm.log"));
    ASSERT_EQ(rc, 0);
    const auto adjusted = connlatent::read_feature_matrix(dir.str("adj.bin"));
    EXPECT_EQ(adjusted.rows(), 150);
    EXPECT_TRUE(adjusted.allFinite());
    EXPECT_TRUE(fs::exists(dir.str("cmb.bin")));
}

TEST(Cli, EvaluateScoresFile) {
    TempDir dir("connlatent_cli_eval");
    connlatent::write_text_file(dir.str("scores.csv"), "0.1,0\n0.2,0\n0.8,1\n0.9,1\n");
    const int rc = run_cli("evaluate --scores " + dir.str("scores.csv") + " --tune --roc-out " +
                               dir.str("roc.csv"),
                           dir.str("eval.log"));
    ASSERT_EQ(rc, 0);
    const std::string log = connlatent::read_text_file(dir.str("eval.log"));
    EXPECT_NE(log.find("accuracy,1"), std::string::npos);
    EXPECT_NE(log.find("auc,1"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir.str("roc.csv")));
}

TEST(Cli, PermtestReportsPValue) {
    TempDir dir("connlatent_cli_perm");
    make_fixture(dir, 150);
    const int rc = run_cli("permtest --metadata " + dir.str("meta.csv") + " --features " + dir.str("feats.bin") +
                               " --model svm --kernel linear --c 1 --iterations 19 --seed 3 --threads 2"
                               " --histogram-out " +
                               dir.str("hist.csv"),
                           dir.str("perm.log"));
    ASSERT_EQ(rc, 0);
    const std::string log = connlatent::read_text_file(dir.str("perm.log"));
    EXPECT_NE(log.find("p = "), std::string::npos);
    const std::string hist = connlatent::read_text_file(dir.str("hist.csv"));
    EXPECT_NE(hist.find("observed,"), std::string::npos);
}

TEST(Cli, BootstrapReportsIntervals) {
    TempDir dir("connlatent_cli_boot");
    make_fixture(dir, 150);
    const int rc = run_cli("bootstrap --metadata " + dir.str("meta.csv") + " --features " + dir.str("feats.bin") +
                               " --model svm --kernel linear --c 1 --replicates 100 --seed 3 --threads 2",
                           dir.str("boot.log"));
    ASSERT_EQ(rc, 0);
    const std::string log = connlatent::read_text_file(dir.str("boot.log"));
    EXPECT_NE(log.find("accuracy: point"), std::string::npos);
    EXPECT_NE(log.find("95% CI ["), std::string::npos);
}

TEST(Cli, PlotsFromRunDirectory) {
    TempDir dir("connlatent_cli_plots");
    make_fixture(dir);
    int rc = run_cli("run --preset paper-latent --metadata " + dir.str("meta.csv") + " --features " +
                         dir.str("feats.bin") + " --output-dir " + dir.str("out") + " --seed 5" + kSmallRunArgs,
                     dir.str("run.log"));
    ASSERT_EQ(rc, 0);
    rc = run_cli("plots --dir " + dir.str("out"), dir.str("plots.log"));
    EXPECT_EQ(rc, 0);
    EXPECT_TRUE(fs::exists(dir.str("out/loss_curve.svg")));
    EXPECT_TRUE(fs::exists(dir.str("out/roc_svm.svg")));
    EXPECT_TRUE(fs::exists(dir.str("out/roc_rf.svg")));
}
