#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "benford/csv.hpp"
#include "benford/experiments.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;

namespace benford::cli {
namespace {

const fs::path kFixtures = BENFORD_FIXTURES_DIR;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("benford_cli_" + name);
  fs::remove_all(p);
  return p;
}

// One small checkpoint shared by the subcommands that need a model.
const fs::path& checkpoint() {
  static const fs::path path = [] {
    const fs::path dir = fresh_dir("model");
    const Result r = call({"train", "--train-size", "300", "--held-out-size", "50", "--epochs", "1", "--out-dir",
                           dir.string(), "--seed", "3"});
    EXPECT_EQ(r.code, kOk) << r.err;
    return dir / "model.bnet";
  }();
  return path;
}

TEST(Cli, NoArgumentsIsUsageError) {
  const Result r = call({});
  EXPECT_EQ(r.code, kUsageError);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, UnknownFlagAndBadValuesAreUsageErrors) {
  EXPECT_EQ(call({"score", "--bogus"}).code, kUsageError);
  EXPECT_EQ(call({"score", "--dataset", "jpeg"}).code, kUsageError);
  EXPECT_EQ(call({"synth", "--channels", "2"}).code, kUsageError);
  EXPECT_EQ(call({"frobnicate"}).code, kUsageError);
  EXPECT_EQ(call({"sweep", "--dataset", "synth"}).code, kUsageError) << "--checkpoint is required";
}

TEST(Cli, HelpListsEveryFlag) {
  for (const auto& sub : subcommands()) {
    const Result r = call({sub, "--help"});
    EXPECT_EQ(r.code, kOk) << sub;
    const std::string help = help_text(sub);
    EXPECT_EQ(r.out, help);
    const auto flags = flag_names(sub);
    EXPECT_FALSE(flags.empty());
    for (const auto& f : flags) EXPECT_NE(help.find(f), std::string::npos) << sub << " " << f;
  }
}

// The README documents every flag of every subcommand.
TEST(Cli, ReadmeDocumentsEveryFlag) {
  const std::string readme = slurp(fs::path(BENFORD_SOURCE_DIR) / "README.md");
  ASSERT_FALSE(readme.empty());
  for (const auto& sub : subcommands()) {
    EXPECT_NE(readme.find("benford " + sub), std::string::npos) << sub;
    for (const auto& f : flag_names(sub)) EXPECT_NE(readme.find(f), std::string::npos) << sub << " " << f;
  }
}

TEST(Cli, SynthWritesCorpus) {
  const fs::path dir = fresh_dir("synth");
  const Result r = call({"synth", "-n", "3", "--height", "16", "--width", "20", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::size_t pngs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 3u);
  EXPECT_EQ(csv::read(dir / "scores.csv").size(), 4u);
  EXPECT_NE(slurp(dir / "settings.txt").find("height = 16"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const fs::path dir = fresh_dir("config");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# synthetic corpus\nn = 2\nheight = 12\nwidth = 12\nout-dir = " << (dir / "from_cfg").string() << "\n";
  }
  Result r = call({"synth", "--config", (dir / "run.cfg").string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(slurp(dir / "from_cfg/settings.txt").find("n = 2"), std::string::npos);

  r = call({"synth", "--config", (dir / "run.cfg").string(), "-n", "4"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(slurp(dir / "from_cfg/settings.txt").find("n = 4"), std::string::npos);

  {
    std::ofstream bad(dir / "bad.cfg");
    bad << "just words\n";
  }
  EXPECT_EQ(call({"synth", "--config", (dir / "bad.cfg").string()}).code, kUsageError);
  EXPECT_EQ(call({"synth", "--config", (dir / "absent.cfg").string()}).code, kUsageError);
  {
    std::ofstream unknown(dir / "unknown.cfg");
    unknown << "colour = blue\n";
  }
  EXPECT_EQ(call({"synth", "--config", (dir / "unknown.cfg").string()}).code, kUsageError);
  fs::remove_all(dir);
}

TEST(Cli, ScoreReportsDegenerateImages) {
  const fs::path dir = fresh_dir("score_blank");
  const Result r = call({"score", "--dataset", "png", "--input", (kFixtures / "blank").string(), "--out-dir",
                         dir.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.err.find("degenerate"), std::string::npos);
  const csv::Table t = csv::read(dir / "scores.csv");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1][10], "degenerate");
  EXPECT_TRUE(fs::exists(dir / "manifest.csv"));
  fs::remove_all(dir);
}

TEST(Cli, ScorePngDirectoryRecordsSkippedFiles) {
  const fs::path dir = fresh_dir("score_dir");
  const Result r = call({"score", "--dataset", "png", "--input", (kFixtures / "pngdir").string(), "--out-dir",
                         dir.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(csv::read(dir / "scores.csv").size(), 5u);
  EXPECT_EQ(csv::read(dir / "manifest.csv").size(), 6u);
  EXPECT_EQ(call({"score", "--dataset", "png", "--input", (kFixtures / "mixed").string(), "--out-dir",
                  dir.string()})
                .code,
            kRuntimeError);
  EXPECT_EQ(call({"score", "--dataset", "png", "--input", (kFixtures / "mixed").string(), "--target-shape",
                  "5x5", "--out-dir", dir.string()})
                .code,
            kOk);
  EXPECT_EQ(call({"score", "--dataset", "png", "--target-shape", "5by5", "--input",
                  (kFixtures / "mixed").string(), "--out-dir", dir.string()})
                .code,
            kUsageError);
  fs::remove_all(dir);
}

TEST(Cli, MissingOrCorruptCheckpointIsRuntimeError) {
  const fs::path dir = fresh_dir("nockpt");
  Result r = call({"attack", "--checkpoint", (dir / "absent.bnet").string(), "-n", "2", "--out-dir",
                   dir.string()});
  EXPECT_EQ(r.code, kRuntimeError);
  EXPECT_NE(r.err.find("absent.bnet"), std::string::npos);
  fs::create_directories(dir);
  {
    std::ofstream junk(dir / "junk.bnet");
    junk << "not a model";
  }
  r = call({"attack", "--checkpoint", (dir / "junk.bnet").string(), "-n", "2", "--out-dir", dir.string()});
  EXPECT_EQ(r.code, kRuntimeError);
  fs::remove_all(dir);
}

TEST(Cli, TrainWritesCheckpointAndMetrics) {
  const fs::path& ckpt = checkpoint();
  ASSERT_TRUE(fs::exists(ckpt));
  const csv::Table metrics = csv::read(ckpt.parent_path() / "metrics.csv");
  EXPECT_EQ(metrics.size(), 2u);
  EXPECT_TRUE(fs::exists(ckpt.parent_path() / "settings.txt"));
}

TEST(Cli, AttackWritesImagesAndOutcomes) {
  const fs::path dir = fresh_dir("attack");
  const Result r = call({"attack", "--checkpoint", checkpoint().string(), "-n", "4", "--attack", "fgsm", "--eps",
                         "0.1", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const csv::Table t = csv::read(dir / "outcomes.csv");
  EXPECT_GE(t.size(), 1u);
  EXPECT_LE(t.size(), 5u);
  EXPECT_EQ(call({"attack", "--checkpoint", checkpoint().string(), "--attack", "cw", "--out-dir", dir.string()}).code,
            kUsageError);
  fs::remove_all(dir);
}

TEST(Cli, SweepIsByteStableAcrossRepeatsAndJobs) {
  const fs::path a = fresh_dir("sweep_a");
  const fs::path b = fresh_dir("sweep_b");
  const std::vector<std::string> common = {"sweep", "--checkpoint", checkpoint().string(), "-n", "12", "--iters",
                                           "5", "--sweep-eps", "0.1,0.2", "--seed", "9"};
  auto args_a = common;
  args_a.insert(args_a.end(), {"--out-dir", a.string()});
  auto args_b = common;
  args_b.insert(args_b.end(), {"--out-dir", b.string(), "--jobs", "2"});
  ASSERT_EQ(call(args_a).code, kOk);
  ASSERT_EQ(call(args_b).code, kOk);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
  EXPECT_GE(files, 8u);
  EXPECT_EQ(csv::read(a / "epsilon_sweep.csv").size(), 3u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, CompareFromScoresMatchesSummary) {
  const fs::path dir = fresh_dir("compare");
  ASSERT_EQ(call({"sweep", "--checkpoint", checkpoint().string(), "-n", "16", "--iters", "5",
                  "--skip-epsilon-sweep", "--out-dir", (dir / "sweep").string()})
                .code,
            kOk);
  const Result r = call({"compare", "--from-scores", (dir / "sweep/scores.csv").string(), "--out-dir",
                         (dir / "cmp").string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const csv::Table summary = csv::read(dir / "sweep/separation_summary.csv");
  const csv::Table cmp = csv::read(dir / "cmp/compare.csv");
  std::map<std::string, std::string> best;
  for (std::size_t i = 1; i < summary.size(); ++i) {
    best[summary[i][0] + "/" + summary[i][2]] = summary[i][10];
  }
  for (std::size_t i = 1; i < cmp.size(); ++i) {
    EXPECT_EQ(cmp[i][3], best[cmp[i][0] + "/" + cmp[i][2]]) << cmp[i][0];
  }
  EXPECT_EQ(call({"compare", "--out-dir", dir.string()}).code, kUsageError);
  fs::remove_all(dir);
}

TEST(Cli, TraceWithGivenThreshold) {
  const fs::path dir = fresh_dir("trace");
  const Result r = call({"trace", "--checkpoint", checkpoint().string(), "-n", "6", "--trace-count", "2", "--iters",
                         "4", "--threshold", "0.05", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const csv::Table t = csv::read(dir / "traces.csv");
  EXPECT_EQ(t.size(), 1u + 2u * 5u);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace benford::cli
