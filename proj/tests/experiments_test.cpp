#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "benford/csv.hpp"
#include "benford/experiments.hpp"
#include "benford/idx.hpp"
#include "benford/svg.hpp"
#include "benford/train.hpp"

namespace fs = std::filesystem;

namespace benford {
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> directory_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("benford_exp_" + name);
  fs::remove_all(p);
  return p;
}

// A small convnet trained briefly on the bundled digits: accurate enough that
// most sampled images survive the misclassification filter, cheap enough to
// build once per test binary.
class ExperimentsTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const MnistSplits splits = load_mnist_dir(fs::path(BENFORD_FIXTURES_DIR) / "../../data/mnist-desk");
    data_ = new LabeledDataset(splits.test.slice(0, 80));
    const LabeledDataset train = splits.train.slice(0, 1500);
    nn::Model m({28, 28, 1}, {nn::Conv2D{4}, nn::ReLU{}, nn::MaxPool2{}, nn::MaxPool2{}, nn::Flatten{},
                              nn::Dense{10}, nn::Softmax{}});
    m.initialize(1);
    nn::TrainConfig c;
    c.epochs = 2;
    c.optimizer = nn::Adam{3e-3};
    model_ = new nn::Model(nn::train(std::move(m), train.view(), c).model);
  }
  static void TearDownTestSuite() {
    delete data_;
    delete model_;
  }

  static ExperimentSpec spec(std::size_t n = 24) {
    ExperimentSpec s;
    s.sample_size = n;
    s.rng_seed = 5;
    AttackConfig pgd = AttackConfig::pgd(Norm::Linf, 0.2);
    pgd.max_iters = 10;
    s.attacks = {AttackConfig::fgsm(0.2), pgd};
    return s;
  }

  static const nn::Model& model() { return *model_; }
  static const LabeledDataset& data() { return *data_; }

 private:
  static inline nn::Model* model_ = nullptr;
  static inline LabeledDataset* data_ = nullptr;
};

TEST_F(ExperimentsTest, ModelIsUsable) { EXPECT_GE(nn::accuracy(model(), data().view()), 0.7); }

TEST_F(ExperimentsTest, CountsReconcile) {
  const ExperimentReport r = run_separation_experiment(model(), data(), spec());
  ASSERT_EQ(r.attacks.size(), 2u);
  const std::size_t attacked = r.attacks[0].attacked;
  EXPECT_EQ(r.records.size(), attacked * 3);
  for (const auto& s : r.attacks) {
    EXPECT_EQ(s.sampled, 24u);
    EXPECT_EQ(s.excluded_misclassified + s.attacked, s.sampled);
    EXPECT_EQ(s.attacked, attacked);
    EXPECT_LE(s.succeeded, s.attacked);
    EXPECT_LE(s.adversarial_scored, s.succeeded);
    EXPECT_LE(s.clean_scored, s.attacked);
    const auto adv = std::count_if(r.records.begin(), r.records.end(), [&](const ScoreRecord& rec) {
      return rec.attack && *rec.attack == s.attack && rec.attack_success;
    });
    EXPECT_EQ(static_cast<std::size_t>(adv), s.succeeded);
  }
  for (std::size_t i = 0; i < attacked; ++i) {
    EXPECT_EQ(r.records[i].condition, Condition::Clean);
    EXPECT_EQ(r.records[attacked + i].image_id, r.records[i].image_id);
    EXPECT_EQ(model().predict(data().images[data().index_of(r.records[i].image_id)]),
              data().labels[data().index_of(r.records[i].image_id)]);
  }
}

TEST_F(ExperimentsTest, OutputsAreByteStableAcrossRunsAndJobs) {
  ExperimentSpec s = spec();
  const fs::path a = fresh_dir("stable_a");
  const fs::path b = fresh_dir("stable_b");
  render_outputs(run_separation_experiment(model(), data(), s), a);
  s.jobs = 3;
  render_outputs(run_separation_experiment(model(), data(), s), b);
  const auto ca = directory_contents(a);
  EXPECT_EQ(ca, directory_contents(b));
  EXPECT_TRUE(ca.count("scores.csv"));
  EXPECT_TRUE(ca.count("separation_summary.csv"));
  EXPECT_TRUE(ca.count("settings.txt"));
  EXPECT_EQ(ca.at("settings.txt").find("jobs"), std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_F(ExperimentsTest, SingleImageSample) {
  const ExperimentReport r = run_separation_experiment(model(), data(), spec(1));
  ASSERT_EQ(r.attacks.size(), 2u);
  EXPECT_EQ(r.attacks[0].sampled, 1u);
  const fs::path out = fresh_dir("single");
  EXPECT_NO_THROW(render_outputs(r, out));
  fs::remove_all(out);
}

TEST_F(ExperimentsTest, ZeroEpsilonLeavesScores) {
  ExperimentSpec s = spec();
  s.attacks = {AttackConfig::fgsm(0.0)};
  const ExperimentReport r = run_separation_experiment(model(), data(), s);
  const std::size_t n = r.attacks[0].attacked;
  EXPECT_EQ(r.attacks[0].succeeded, 0u);
  EXPECT_FALSE(r.attacks[0].ks.has_value());
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(r.records[n + i].digit_probs, r.records[i].digit_probs);
    EXPECT_FALSE(r.records[n + i].attack_success);
  }
}

TEST_F(ExperimentsTest, SpecValidation) {
  ExperimentSpec s = spec();
  s.sample_size = data().size() + 1;
  EXPECT_THROW(run_separation_experiment(model(), data(), s), std::invalid_argument);
  s = spec();
  s.attacks.clear();
  EXPECT_THROW(run_separation_experiment(model(), data(), s), std::invalid_argument);
  s = spec();
  std::swap(s.attacks[0], s.attacks[1]);
  EXPECT_THROW(run_epsilon_sweep(model(), data(), s, {0.1}), std::invalid_argument) << "PGD first";
  s.attacks = {AttackConfig::fgsm(0.1)};
  EXPECT_THROW(run_epsilon_sweep(model(), data(), s, {}), std::invalid_argument);
}

// One epsilon in the sweep must agree with a plain separation run at that budget.
TEST_F(ExperimentsTest, EpsilonSweepMatchesSeparationRun) {
  ExperimentSpec s = spec();
  s.attacks = {AttackConfig::fgsm(0.2)};
  const ExperimentReport sweep = run_epsilon_sweep(model(), data(), s, {0.1, 0.2});
  const ExperimentReport single = run_separation_experiment(model(), data(), s);
  ASSERT_EQ(sweep.epsilon_sweep.size(), 2u);
  const EpsilonRow& row = sweep.epsilon_sweep[1];
  EXPECT_EQ(row.epsilon, 0.2);
  EXPECT_EQ(row.succeeded, single.attacks[0].succeeded);
  std::vector<double> kl;
  std::vector<double> all;
  for (const auto& rec : single.records) {
    if (rec.condition != Condition::Adversarial || rec.degenerate) continue;
    all.push_back(rec.kl);
    if (rec.attack_success) kl.push_back(rec.kl);
  }
  ASSERT_FALSE(kl.empty());
  double sum = 0.0;
  for (double v : kl) sum += v;
  EXPECT_NEAR(row.kl_adversarial_mean, sum / static_cast<double>(kl.size()), 1e-12);
  sum = 0.0;
  for (double v : all) sum += v;
  EXPECT_NEAR(row.kl_perturbed_mean, sum / static_cast<double>(all.size()), 1e-12);
  EXPECT_NEAR(row.success_rate(), static_cast<double>(row.succeeded) / row.attacked, 0.0);
}

TEST_F(ExperimentsTest, TraceStartsAtCleanScore) {
  ExperimentSpec s = spec();
  AttackConfig pgd = AttackConfig::pgd(Norm::L2, 2.0);
  pgd.max_iters = 8;
  s.attacks = {pgd};
  const std::vector<std::string> ids = {data().ids[0], data().ids[1], data().ids[2]};
  const ExperimentReport r = run_iteration_trace(model(), data(), s, ids, 0.1);
  ASSERT_EQ(r.traces.size(), 3u);
  for (const auto& t : r.traces) {
    ASSERT_EQ(t.points.size(), 9u);
    const ScoreRecord clean = score_image(data().images[data().index_of(t.image_id)], t.image_id);
    EXPECT_EQ(t.points[0].ks, clean.ks);
    EXPECT_EQ(t.points[0].kl, clean.kl);
    for (std::size_t k = 0; k < t.points.size(); ++k) EXPECT_EQ(t.points[k].iteration, k);
    if (t.first_crossing) {
      const std::size_t c = *t.first_crossing;
      EXPECT_LE(t.points[c - 1].ks, 0.1);
      EXPECT_GT(t.points[c].ks, 0.1);
    }
  }
  ASSERT_TRUE(r.trace_summary.has_value());
  EXPECT_EQ(r.trace_summary->images, 3u);
  EXPECT_EQ(r.trace_summary->threshold_source, "given");
  s.attacks = {AttackConfig::fgsm(0.1)};
  EXPECT_THROW(run_iteration_trace(model(), data(), s, ids, 0.1), std::invalid_argument);
}

TEST_F(ExperimentsTest, CalibratedTraceMergesBothParts) {
  ExperimentSpec s = spec(20);
  AttackConfig pgd = AttackConfig::pgd(Norm::L2, 2.0);
  pgd.max_iters = 6;
  s.attacks = {pgd};
  const ExperimentReport r = run_calibrated_trace(model(), data(), s, 4);
  ASSERT_EQ(r.attacks.size(), 1u);
  EXPECT_LE(r.traces.size(), 4u);
  ASSERT_TRUE(r.trace_summary.has_value());
  if (r.attacks[0].ks) {
    EXPECT_EQ(r.trace_summary->threshold, r.attacks[0].ks->separation.best_threshold);
  }
  std::map<std::string, int> clean_ids;
  for (const auto& rec : r.records) {
    if (rec.condition == Condition::Clean) ++clean_ids[rec.image_id];
  }
  for (const auto& [id, count] : clean_ids) EXPECT_EQ(count, 1) << id;
}

// Scores read back from scores.csv and swept by brute force reproduce the
// reported best percentages.
TEST_F(ExperimentsTest, ScoresCsvRoundTripReproducesSeparation) {
  const ExperimentReport r = run_separation_experiment(model(), data(), spec(40));
  const fs::path out = fresh_dir("roundtrip");
  render_outputs(r, out);
  const std::vector<ScoreRecord> back = read_scores_csv(out / "scores.csv");
  ASSERT_EQ(back.size(), r.records.size());
  std::vector<double> clean;
  for (const auto& rec : back) {
    if (rec.condition == Condition::Clean && !rec.degenerate) clean.push_back(rec.ks);
  }
  for (const auto& s : r.attacks) {
    if (!s.ks) continue;
    std::vector<double> adv;
    for (const auto& rec : back) {
      if (rec.attack && AttackKey::of(*rec.attack) == AttackKey::of(s.attack) && rec.attack_success &&
          !rec.degenerate) {
        adv.push_back(rec.ks);
      }
    }
    std::vector<double> thresholds = clean;
    thresholds.insert(thresholds.end(), adv.begin(), adv.end());
    thresholds.push_back(-1.0);
    double best = 0.0;
    for (double t : thresholds) best = std::max(best, separation_percentage(clean, adv, t));
    EXPECT_DOUBLE_EQ(best, s.ks->separation.best_percentage) << s.attack.label();
  }
  const auto rebuilt = summaries_from_records(back);
  ASSERT_EQ(rebuilt.size(), r.attacks.size());
  for (std::size_t a = 0; a < rebuilt.size(); ++a) {
    ASSERT_EQ(rebuilt[a].ks.has_value(), r.attacks[a].ks.has_value());
    if (rebuilt[a].ks) {
      EXPECT_EQ(rebuilt[a].ks->separation.best_percentage, r.attacks[a].ks->separation.best_percentage);
      EXPECT_EQ(rebuilt[a].kl->mann_whitney_p, r.attacks[a].kl->mann_whitney_p);
    }
  }
  fs::remove_all(out);
}

ScoreRecord record(std::string id, Condition c, double ks, double kl, bool success = false) {
  ScoreRecord r;
  r.image_id = std::move(id);
  r.condition = c;
  r.ks = ks;
  r.kl = kl;
  r.digit_probs[0] = 1.0;
  r.support_count = 4;
  if (c == Condition::Adversarial) {
    r.attack = AttackConfig::fgsm(0.1);
    r.attack_success = success;
  }
  return r;
}

TEST(Summaries, IdenticalStatisticsGiveIdenticalPercentages) {
  std::vector<ScoreRecord> recs;
  const double scores[] = {0.1, 0.25, 0.3, 0.05, 0.4, 0.2};
  for (int i = 0; i < 6; ++i) {
    recs.push_back(record("c" + std::to_string(i), Condition::Clean, scores[i], scores[i]));
    recs.push_back(record("c" + std::to_string(i), Condition::Adversarial, scores[5 - i] + 0.1, scores[5 - i] + 0.1, true));
  }
  ExperimentReport r;
  r.records = recs;
  r.attacks = summaries_from_records(recs);
  const auto rows = compare_statistics(r);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].statistic, Statistic::KS);
  EXPECT_EQ(rows[1].statistic, Statistic::KL);
  EXPECT_EQ(rows[0].best_percentage, rows[1].best_percentage);
  EXPECT_EQ(rows[0].best_threshold, rows[1].best_threshold);

  r.attacks = summaries_from_records(recs, Statistic::KS);
  EXPECT_THROW(compare_statistics(r), std::invalid_argument);
}

TEST(Summaries, DegenerateAndFailedRecordsAreExcluded) {
  std::vector<ScoreRecord> recs = {record("a", Condition::Clean, 0.1, 0.1), record("b", Condition::Clean, 0.2, 0.2),
                                   record("a", Condition::Adversarial, 0.9, 0.9, false),
                                   record("b", Condition::Adversarial, 0.3, 0.3, true)};
  ScoreRecord dead = record("z", Condition::Clean, std::nan(""), std::nan(""));
  dead.degenerate = true;
  recs.push_back(dead);
  const auto s = summaries_from_records(recs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].clean_scored, 2u);
  EXPECT_EQ(s[0].adversarial_scored, 1u);
  EXPECT_EQ(s[0].succeeded, 1u);
  EXPECT_DOUBLE_EQ(s[0].ks->separation.best_percentage, 1.0);
}

TEST(MergeReports, DeduplicatesCleanRecordsAndKeepsFirstSetting) {
  ExperimentReport a;
  a.records = {record("x", Condition::Clean, 0.1, 0.1)};
  a.settings = {{"seed", "1"}};
  ExperimentReport b;
  b.records = {record("x", Condition::Clean, 0.1, 0.1), record("y", Condition::Clean, 0.2, 0.2),
               record("x", Condition::Adversarial, 0.3, 0.3, true)};
  b.settings = {{"seed", "2"}, {"trace.threshold", "0.1"}};
  merge_reports(a, b);
  EXPECT_EQ(a.records.size(), 3u);
  ASSERT_EQ(a.settings.size(), 2u);
  EXPECT_EQ(a.settings[0].second, "1");
}

TEST(RenderOutputs, EmptyReportWritesHeadersOnly) {
  const fs::path out = fresh_dir("empty");
  render_outputs(ExperimentReport{}, out);
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    EXPECT_NE(e.path().extension(), ".svg") << e.path();
    if (e.path().extension() != ".csv") continue;
    ++csvs;
    const csv::Table t = csv::read(e.path());
    EXPECT_EQ(t.size(), 1u) << e.path();
  }
  EXPECT_EQ(csvs, 7u);
  EXPECT_EQ(csv::read(out / "scores.csv").front(), score_columns());
  fs::remove_all(out);
}

// Frozen by hand from the column definitions.
TEST(RenderOutputs, GoldenScoresCsv) {
  ScoreRecord clean = record("img-0", Condition::Clean, 0.25, 0.5);
  clean.digit_probs = {0.5, 0.25, 0, 0, 0, 0, 0, 0, 0.25};
  ScoreRecord adv = record("img-0", Condition::Adversarial, 0.125, 2.0, true);
  ScoreRecord dead = record("img-1", Condition::Clean, std::nan(""), std::nan(""));
  dead.degenerate = true;
  dead.digit_probs = {};
  dead.support_count = 0;
  const fs::path out = fresh_dir("golden");
  fs::create_directories(out);
  write_scores_csv({clean, adv, dead}, out / "scores.csv");
  EXPECT_EQ(slurp(out / "scores.csv"),
            "image_id,condition,attack,norm,epsilon,step_size,max_iters,random_start,early_stop,attack_success,"
            "status,ks,kl,p1,p2,p3,p4,p5,p6,p7,p8,p9,support_count\n"
            "img-0,clean,,,,,,,,,ok,0.25,0.5,0.5,0.25,0,0,0,0,0,0,0.25,4\n"
            "img-0,adversarial,fgsm,linf,0.1,0.1,1,0,1,1,ok,0.125,2,1,0,0,0,0,0,0,0,0,4\n"
            "img-1,clean,,,,,,,,,degenerate,,,0,0,0,0,0,0,0,0,0,0\n");
  const auto back = read_scores_csv(out / "scores.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].digit_probs, clean.digit_probs);
  EXPECT_TRUE(back[2].degenerate);
  EXPECT_EQ(AttackKey::of(*back[1].attack), AttackKey::of(*adv.attack));
  fs::remove_all(out);
}

TEST_F(ExperimentsTest, SvgPlotsAreWellFormedXml) {
  ExperimentSpec s = spec(30);
  s.attacks = {AttackConfig::fgsm(0.2)};
  ExperimentReport r = run_epsilon_sweep(model(), data(), s, {0.1, 0.2});
  AttackConfig pgd = AttackConfig::pgd(Norm::L2, 2.0);
  pgd.max_iters = 4;
  s.attacks = {pgd};
  merge_reports(r, run_iteration_trace(model(), data(), s, {data().ids[0], data().ids[3]}, 0.05));
  const fs::path out = fresh_dir("svg");
  render_outputs(r, out);
  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.path().extension() != ".svg") continue;
    ++svgs;
    boost::property_tree::ptree tree;
    ASSERT_NO_THROW(boost::property_tree::read_xml(e.path().string(), tree)) << e.path();
    EXPECT_EQ(tree.count("svg"), 1u) << e.path();
  }
  EXPECT_GE(svgs, 3u);
  fs::remove_all(out);
}

TEST(Svg, EscapesMarkup) {
  EXPECT_EQ(svg::escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
  svg::Figure f;
  f.title = "KS <clean> & adv";
  f.scatter("pts", "#000", {{0, 0}, {1, 2}});
  boost::property_tree::ptree tree;
  std::istringstream in(f.render());
  EXPECT_NO_THROW(boost::property_tree::read_xml(in, tree));
}

}  // namespace
}  // namespace benford
