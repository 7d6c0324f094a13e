#include "txpert/cli.hpp"
#include "txpert/report.hpp"

#include "test_util.hpp"

#include "json.hpp"

using namespace txpert;
using namespace testutil;

namespace {

const char* kSmallConfig = R"([run]
seed = 7
[encoder]
layers = 1
input_dim = 8
hidden_dim = 8
heads = 2
[model]
basal_hidden = 16
[train]
max_epochs = 2
batch_size = 32
[eval]
reproducibility_seeds = 2
[synth]
num_genes = 30
num_perturbations = 12
replicates = 4
controls_per_context = 6
)";

int run(const std::vector<std::string>& args) { return run_cli(args); }

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}), kExitUsage);
    EXPECT_EQ(run({"frobnicate"}), kExitUsage);
    EXPECT_EQ(run({"synth"}), kExitUsage);
    const auto dir = fresh_dir("usage");
    EXPECT_EQ(run({"synth", "--out", dir.string()}), kExitUsage);  // no seed
    write_file(dir / "bad.ini", "[run]\nseed = 1\nunknown = 2\n");
    EXPECT_EQ(run({"synth", "--config", (dir / "bad.ini").string(), "--out", dir.string()}), kExitUsage);
    EXPECT_EQ(run({"synth", "--config", (dir / "missing.ini").string(), "--out", dir.string()}), kExitUsage);
}

TEST(Cli, MissingDataExitsTwo) {
    const auto dir = fresh_dir("data");
    EXPECT_EQ(run({"split", "--seed", "1", "--out", dir.string()}), kExitData);
    EXPECT_EQ(run({"report", "--out", dir.string(), (dir / "nope.json").string()}), kExitData);
}

TEST(Cli, PipelineProducesValidReport) {
    const auto dir = fresh_dir("pipe");
    write_file(dir / "run.ini", kSmallConfig);
    const std::string cfg = (dir / "run.ini").string();
    const std::string out = (dir / "out").string();
    ASSERT_EQ(run({"synth", "--config", cfg, "--out", out}), kExitOk);
    ASSERT_EQ(run({"split", "--config", cfg, "--out", out}), kExitOk);
    ASSERT_EQ(run({"train", "--config", cfg, "--out", out}), kExitOk);
    ASSERT_EQ(run({"eval", "--config", cfg, "--out", out}), kExitOk);
    ASSERT_EQ(run({"baseline", "--config", cfg, "--out", out}), kExitOk);
    const auto j = nlohmann::json::parse(read_file(dir / "out" / "metrics.json"));
    EXPECT_NO_THROW(validate_report_json(j));
    EXPECT_EQ(j.at("model"), "gatv2");
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "history.csv"));
    const auto manifest = nlohmann::json::parse(read_file(dir / "out" / "manifest-eval.json"));
    EXPECT_TRUE(manifest.contains("timestamp"));
    EXPECT_EQ(manifest.at("inputs")[0].at("sha256").get<std::string>().size(), 64u);
    ASSERT_EQ(run({"report", "--out", (dir / "sum").string(), (dir / "out" / "metrics.json").string(),
                   (dir / "out" / "baseline.json").string()}),
              kExitOk);
    EXPECT_TRUE(std::filesystem::exists(dir / "sum" / "summary.csv"));
}

TEST(Cli, AblateWritesOneRowPerPoint) {
    const auto dir = fresh_dir("ablate");
    write_file(dir / "run.ini", kSmallConfig);
    const std::string cfg = (dir / "run.ini").string();
    const std::string out = (dir / "out").string();
    ASSERT_EQ(run({"synth", "--config", cfg, "--out", out}), kExitOk);
    ASSERT_EQ(run({"ablate", "--config", cfg, "--out", out, "--rewire", "0,1.0"}), kExitOk);
    const auto summary = nlohmann::json::parse(read_file(dir / "out" / "summary.json"));
    ASSERT_EQ(summary.at("rows").size(), 2u);
    EXPECT_EQ(summary.at("rows")[0].at("name"), "rewire-0");
    EXPECT_EQ(summary.at("rows")[1].at("name"), "rewire-1");
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "rewire-1" / "model.json"));
}

TEST(Cli, BuildGraphFromEdgesWithRewire) {
    const auto dir = fresh_dir("build");
    write_file(dir / "e.tsv", "source\ttarget\tweight\nA\tB\t1\nB\tC\t1\nC\tD\t1\nD\tA\t1\n");
    ASSERT_EQ(run({"build-graph", "--edges", (dir / "e.tsv").string(), "--symmetrize", "--name", "sym",
                   "--out", dir.string()}),
              kExitOk);
    const std::string text = read_file(dir / "sym.tsv");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
    EXPECT_EQ(run({"build-graph", "--edges", (dir / "e.tsv").string(), "--rewire", "0.5", "--out", dir.string()}),
              kExitUsage);
    EXPECT_EQ(run({"build-graph", "--edges", (dir / "e.tsv").string(), "--rewire", "0.5", "--seed", "1",
                   "--name", "rw", "--out", dir.string()}),
              kExitOk);
    EXPECT_EQ(run({"build-graph", "--out", dir.string()}), kExitUsage);
}

TEST(Cli, Sha256KnownVector) {
    const auto dir = fresh_dir("sha");
    write_file(dir / "abc", "abc");
    EXPECT_EQ(sha256_file(dir / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
