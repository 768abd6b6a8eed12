// End-to-end acceptance run: trains the desk-scale CNN, runs the attack and
// detection experiments, and prints one PASS/FAIL line per criterion.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "benford/attacks.hpp"
#include "benford/checkpoint.hpp"
#include "benford/csv.hpp"
#include "benford/detector.hpp"
#include "benford/digits.hpp"
#include "benford/experiments.hpp"
#include "benford/idx.hpp"
#include "benford/stats.hpp"
#include "benford/train.hpp"
#include "support/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace benford;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

class Ledger {
 public:
  explicit Ledger(fs::path report) : report_(std::move(report)) {}

  void record(int id, const std::string& name, bool pass, const std::string& detail) {
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << detail;
    std::cout << line.str() << std::endl;
    lines_.push_back(line.str());
    failures_ += pass ? 0 : 1;
  }

  int failures() const { return failures_; }

  void save() const {
    std::ofstream out(report_);
    for (const auto& l : lines_) out << l << '\n';
  }

 private:
  fs::path report_;
  std::vector<std::string> lines_;
  int failures_ = 0;
};

struct Options {
  std::string out_dir = "acceptance_out";
  std::string data_dir = BENFORD_DATA_DIR "/mnist-desk";
  std::string tests_binary = BENFORD_TESTS_BINARY;
  std::size_t epochs = 6;
  std::uint64_t seed = 0;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  bool verbose = false;
};

// Criterion 1: exact Benford reference values.
void benford_reference(Ledger& ledger) {
  const auto start = Clock::now();
  const DigitDistribution p = benford_pmf();
  double worst = 0.0;
  double sum = 0.0;
  bool monotone = true;
  for (int d = 1; d <= 9; ++d) {
    worst = std::max(worst, std::abs(p[d] - std::log10(1.0 + 1.0 / d)));
    sum += p[d];
    if (d > 1 && !(p[d] < p[d - 1])) monotone = false;
  }
  const bool pass = worst <= 1e-12 && sum == 1.0 && monotone;
  ledger.record(1, "Benford reference", pass,
                "max |P(d) - log10(1+1/d)| = " + fmt("%.1e", worst) + ", sum - 1 = " + fmt("%.1e", sum - 1.0) +
                    (monotone ? ", decreasing" : ", NOT decreasing") + ", " + fmt("%.3f s", seconds_since(start)));
}

// Criterion 2: finite-difference gradient checks.
void gradient_suite(Ledger& ledger) {
  const auto start = Clock::now();
  constexpr int kArchitectures = 24;
  std::mt19937_64 rng(2024);
  double worst_param = 0.0;
  double worst_input = 0.0;
  for (int k = 0; k < kArchitectures; ++k) {
    nn::Model m = testing::random_architecture(rng);
    m.initialize(static_cast<std::uint64_t>(k));
    std::normal_distribution<double> g(0.0, 0.05);
    for (double& v : m.parameters()) v += g(rng);
    const ImageTensor x = testing::random_input(m, rng);
    const auto r = testing::check_gradients(m, x, static_cast<std::size_t>(k) % m.num_classes());
    worst_param = std::max(worst_param, r.max_param_error);
    worst_input = std::max(worst_input, r.max_input_error);
  }
  const double elapsed = seconds_since(start);
  const bool pass = worst_param < 1e-4 && worst_input < 1e-4 && elapsed < 60.0;
  ledger.record(2, "Gradient check", pass,
                std::to_string(kArchitectures) + " architectures, max rel error params " + fmt("%.2e", worst_param) +
                    ", inputs " + fmt("%.2e", worst_input) + ", " + fmt("%.1f s", elapsed));
}

// Criterion 3: desk-scale training.
nn::Model desk_training(Ledger& ledger, const MnistSplits& splits, const LabeledDataset& held_out,
                        const Options& o, const fs::path& out) {
  const auto start = Clock::now();
  const LabeledDataset train = sample_subset(splits.train, 8000, o.seed);
  nn::Model model = nn::Model::desk_cnn();
  model.initialize(o.seed);
  nn::TrainConfig config;
  config.epochs = o.epochs;
  config.rng_seed = o.seed;
  config.jobs = o.jobs;
  const nn::TrainResult result = nn::train(std::move(model), train.view(), config, held_out.view());
  nn::save_checkpoint(result.model, out / "model.bnet");
  const double acc = nn::accuracy(result.model, held_out.view(), o.jobs);
  const double elapsed = seconds_since(start);
  const bool pass = acc >= 0.95 && o.epochs <= 10 && elapsed <= 1800.0;
  ledger.record(3, "Desk-scale training", pass,
                "held-out accuracy " + fmt("%.2f%%", 100.0 * acc) + " on " + std::to_string(held_out.size()) +
                    " test images after " + std::to_string(o.epochs) + " epochs on " +
                    std::to_string(train.size()) + " training images, " + fmt("%.0f s", elapsed));
  return result.model;
}

/// The first `n` correctly classified images of `pool`, in pool order.
LabeledDataset first_correct(const nn::Model& model, const LabeledDataset& pool, std::size_t n) {
  LabeledDataset out;
  out.class_count = pool.class_count;
  for (std::size_t i = 0; i < pool.size() && out.size() < n; ++i) {
    if (model.predict(pool.images[i]) != pool.labels[i]) continue;
    out.images.push_back(pool.images[i]);
    out.labels.push_back(pool.labels[i]);
    out.ids.push_back(pool.ids[i]);
  }
  return out;
}

// Criterion 4: PGD-linf efficacy and invariants, attack by attack.
void attack_efficacy(Ledger& ledger, const nn::Model& model, const LabeledDataset& correct, const Options& o) {
  const AttackConfig base = AttackConfig::pgd(Norm::Linf, 0.2);
  std::vector<AttackOutcome> outcomes(correct.size());
  const auto start = Clock::now();
  for (std::size_t i = 0; i < correct.size(); ++i) {
    AttackConfig c = base;
    c.rng_seed = derive_seed(o.seed, c.label() + "/" + correct.ids[i]);
    outcomes[i] = pgd(model, correct.images[i], correct.labels[i], c);
  }
  std::size_t success = 0;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    success += outcomes[i].success;
    auto x0 = correct.images[i].data();
    for (const auto& step : outcomes[i].trace) {
      auto x = step.image.data();
      for (std::size_t k = 0; k < x.size(); ++k) {
        const bool in_ball = x[k] >= x0[k] - base.epsilon && x[k] <= x0[k] + base.epsilon;
        const bool in_range = x[k] >= 0.0 && x[k] <= 1.0;
        if (!in_ball || !in_range) ++violations;
      }
    }
  }
  const double rate = correct.empty() ? 0.0 : static_cast<double>(success) / static_cast<double>(correct.size());
  const bool pass = correct.size() == 200 && rate >= 0.90 && violations == 0;
  ledger.record(4, "PGD-linf efficacy", pass,
                std::to_string(success) + "/" + std::to_string(correct.size()) + " misclassified (" +
                    fmt("%.1f%%", 100.0 * rate) + "), eps 0.2, step 0.02, 40 iters, random start; " +
                    std::to_string(violations) + " ball/range violations, " + fmt("%.1f s", seconds_since(start)));
}

std::string separation_detail(const AttackSummary& s) {
  if (!s.ks) return "no KS summary (empty score set)";
  return std::to_string(s.adversarial_scored) + " adversarial vs " + std::to_string(s.clean_scored) +
         " clean; mean KS adv " + fmt("%.4f", s.ks->mean_adversarial) + " vs clean " +
         fmt("%.4f", s.ks->mean_clean) + ", Mann-Whitney p " + fmt("%.3g", s.ks->mann_whitney_p) +
         ", best separation " + fmt("%.2f%%", 100.0 * s.ks->separation.best_percentage);
}

// Criteria 5 and 6: detection direction and norm ordering.
ExperimentReport separation(Ledger& ledger, const nn::Model& model, const LabeledDataset& correct,
                            const Options& o) {
  ExperimentSpec spec;
  spec.sample_size = correct.size();
  spec.rng_seed = o.seed;
  spec.jobs = o.jobs;
  spec.attacks = {AttackConfig::pgd(Norm::Linf, 0.2), AttackConfig::pgd(Norm::L2, 2.0)};
  ExperimentReport report = run_separation_experiment(model, correct, spec);

  const AttackSummary& linf = report.attacks[0];
  const AttackSummary& l2 = report.attacks[1];
  const bool direction = linf.ks && linf.adversarial_scored >= 200 &&
                         linf.ks->mean_adversarial > linf.ks->mean_clean && linf.ks->mann_whitney_p < 0.01 &&
                         linf.ks->separation.best_percentage >= 0.60;
  ledger.record(5, "Detection direction (PGD-linf)", direction, separation_detail(linf));

  const bool ordering = linf.ks && l2.ks &&
                        linf.ks->separation.best_percentage >= l2.ks->separation.best_percentage - 0.02;
  ledger.record(6, "Norm ordering", ordering,
                "best KS separation linf " +
                    (linf.ks ? fmt("%.2f%%", 100.0 * linf.ks->separation.best_percentage) : std::string("n/a")) +
                    " vs l2 " +
                    (l2.ks ? fmt("%.2f%%", 100.0 * l2.ks->separation.best_percentage) : std::string("n/a")) +
                    " (tolerance 2 points)");
  return report;
}

// Criterion 7: FGSM epsilon monotonicity.
ExperimentReport epsilon_monotonicity(Ledger& ledger, const nn::Model& model, const LabeledDataset& correct,
                                      const Options& o) {
  ExperimentSpec spec;
  spec.sample_size = correct.size();
  spec.rng_seed = o.seed;
  spec.jobs = o.jobs;
  spec.attacks = {AttackConfig::fgsm(0.1)};
  ExperimentReport report = run_epsilon_sweep(model, correct, spec, {0.1, 0.2, 0.5});
  bool increasing = report.epsilon_sweep.size() == 3;
  std::string detail = "mean adversarial KL";
  for (std::size_t k = 0; k < report.epsilon_sweep.size(); ++k) {
    const EpsilonRow& row = report.epsilon_sweep[k];
    detail += (k ? ", " : " ") + fmt("eps %.1f: ", row.epsilon) + fmt("%.4f", row.kl_adversarial_mean) + " (" +
              std::to_string(row.succeeded) + "/" + std::to_string(row.attacked) + " successful)";
    if (k > 0 && !(row.kl_adversarial_mean > report.epsilon_sweep[k - 1].kl_adversarial_mean)) increasing = false;
  }
  if (!report.epsilon_sweep.empty()) detail += fmt("; clean mean %.4f", report.epsilon_sweep[0].kl_clean_mean);
  ledger.record(7, "FGSM epsilon monotonicity", increasing, detail);
  return report;
}

// Criterion 8: early-warning traces.
ExperimentReport early_warning(Ledger& ledger, const nn::Model& model, const LabeledDataset& correct,
                               const Options& o) {
  ExperimentSpec spec;
  spec.sample_size = correct.size();
  spec.rng_seed = o.seed;
  spec.jobs = o.jobs;
  spec.attacks = {AttackConfig::pgd(Norm::L2, 2.0)};
  ExperimentReport report = run_calibrated_trace(model, correct, spec, 60);
  std::size_t mismatched = 0;
  for (const auto& t : report.traces) {
    const ScoreRecord clean = score_image(correct.images[correct.index_of(t.image_id)], t.image_id);
    if (t.points.empty() || t.points[0].ks != clean.ks || t.points[0].kl != clean.kl) ++mismatched;
  }
  const auto& s = report.trace_summary;
  const bool pass = s && report.traces.size() >= 50 && s->early_warnings >= 1 && mismatched == 0;
  ledger.record(8, "Early-warning traces", pass,
                s ? std::to_string(s->early_warnings) + " of " + std::to_string(s->images) +
                        " traced images cross KS threshold " + fmt("%.4f", s->threshold) +
                        " before misclassification (" + std::to_string(s->misclassified) +
                        " misclassified); iteration-0 mismatches: " + std::to_string(mismatched)
                  : std::string("no trace summary"));
  return report;
}

// Criterion 9: compare table completeness and recomputation from scores.csv.
void statistic_comparison(Ledger& ledger, const ExperimentReport& report, const fs::path& dir) {
  render_outputs(report, dir);
  const csv::Table table = csv::read(dir / "compare.csv");
  const std::vector<ScoreRecord> records = read_scores_csv(dir / "scores.csv");

  std::vector<double> clean_ks;
  std::vector<double> clean_kl;
  for (const auto& r : records) {
    if (r.condition == Condition::Clean && !r.degenerate) {
      clean_ks.push_back(r.ks);
      clean_kl.push_back(r.kl);
    }
  }
  auto brute = [](const std::vector<double>& clean, const std::vector<double>& adv) {
    std::vector<double> ts = clean;
    ts.insert(ts.end(), adv.begin(), adv.end());
    ts.push_back(-1.0);
    double best = 0.0;
    for (double t : ts) best = std::max(best, separation_percentage(clean, adv, t));
    return best;
  };

  std::size_t rows = 0;
  std::size_t pgd_rows = 0;
  std::size_t mismatches = 0;
  bool references = true;
  std::string detail;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& row = table[i];  // attack, epsilon, statistic, best_percentage, best_threshold, reference
    const bool ks = row[2] == "ks";
    std::vector<double> adv;
    for (const auto& r : records) {
      if (r.attack && r.attack->label() == row[0] && csv::number(r.attack->epsilon) == row[1] && r.attack_success &&
          !r.degenerate) {
        adv.push_back(ks ? r.ks : r.kl);
      }
    }
    const double reported = std::stod(row[3]);
    if (adv.empty() || brute(ks ? clean_ks : clean_kl, adv) != reported) ++mismatches;
    ++rows;
    if (!row[0].starts_with("pgd-")) continue;
    ++pgd_rows;
    if (row[5].empty()) references = false;
    detail += (detail.empty() ? "" : ", ") + row[0] + "/" + row[2] + " " + fmt("%.2f%%", 100.0 * reported) +
              " (ref " + (row[5].empty() ? std::string("-") : fmt("%.2f%%", 100.0 * std::stod(row[5]))) + ")";
  }
  const bool pass = pgd_rows == 4 && mismatches == 0 && references;
  ledger.record(9, "Statistic comparison", pass,
                std::to_string(rows) + " rows (" + std::to_string(pgd_rows) + " PGD), " + std::to_string(mismatches) + " recomputation mismatches: " + detail);
}

// Criterion 10: the property tests of the unit suite, run as a subprocess.
void property_suites(Ledger& ledger, const Options& o) {
  const std::string filter =
      "GradientProperty.OffsetInvarianceOnInterior:FirstDigitProperty.PowerOfTenInvariance:"
      "KsProperty.SymmetryRangeTriangle:KlProperty.GibbsInequality:ProjectBallProperty.ContainedAndIdempotent:"
      "SeparationProperty.MatchesBruteForce:Idx.EncodeInvertsParse:Idx.WriteReproducesFiles:"
      "ExperimentsTest.OutputsAreByteStableAcrossRunsAndJobs:Cli.SweepIsByteStableAcrossRepeatsAndJobs:"
      "Train.ResultDoesNotDependOnJobs";
  if (!fs::exists(o.tests_binary)) {
    ledger.record(10, "Property suites", false, "unit test binary not found at " + o.tests_binary);
    return;
  }
  const auto start = Clock::now();
  const std::string command = "\"" + o.tests_binary + "\" --gtest_brief=1 --gtest_filter=" + filter + " > \"" +
                              (fs::path(o.out_dir) / "property_suites.log").string() + "\" 2>&1";
  const int status = std::system(command.c_str());
  const double elapsed = seconds_since(start);
  const bool pass = status == 0 && elapsed < 300.0;
  ledger.record(10, "Property suites", pass,
                std::string(status == 0 ? "all passed" : "failures, see property_suites.log") + " (" +
                    std::to_string(std::count(filter.begin(), filter.end(), ':') + 1) + " suites), " +
                    fmt("%.1f s", elapsed));
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app("Acceptance run for the Benford detector");
  app.add_option("--out-dir", o.out_dir, "Directory for the model, reports and plots")->capture_default_str();
  app.add_option("--data-dir", o.data_dir, "MNIST IDX directory")->capture_default_str();
  app.add_option("--tests-binary", o.tests_binary, "Unit test executable for the property suites")
      ->capture_default_str();
  app.add_option("--epochs", o.epochs, "Training epochs (at most 10)")->capture_default_str();
  app.add_option("--seed", o.seed, "Base seed")->capture_default_str();
  app.add_option("--jobs", o.jobs, "Worker threads")->capture_default_str();
  app.add_flag("--verbose", o.verbose, "Log progress");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(o.verbose ? spdlog::level::info : spdlog::level::warn);

  const fs::path out(o.out_dir);
  fs::create_directories(out);
  Ledger ledger(out / "acceptance_report.txt");

  try {
    benford_reference(ledger);
    gradient_suite(ledger);

    const MnistSplits splits = load_mnist_dir(o.data_dir);
    const LabeledDataset pool = sample_subset(splits.test, splits.test.size(), o.seed);
    const LabeledDataset held_out = pool.slice(0, 1000);
    const nn::Model model = desk_training(ledger, splits, held_out, o, out);

    attack_efficacy(ledger, model, first_correct(model, held_out, 200), o);

    // Enough correctly classified images that >= 200 successful pairs remain.
    const LabeledDataset experiment_set = first_correct(model, pool, 240);
    ExperimentReport report = separation(ledger, model, experiment_set, o);
    merge_reports(report, epsilon_monotonicity(ledger, model, experiment_set, o));
    // Only the traces: the trace run's own calibration repeats the PGD-l2 attack above.
    ExperimentReport traces = early_warning(ledger, model, experiment_set, o);
    report.traces = std::move(traces.traces);
    report.trace_summary = traces.trace_summary;
    for (auto& kv : traces.settings) {
      if (kv.first.starts_with("trace.")) report.settings.push_back(std::move(kv));
    }
    statistic_comparison(ledger, report, out / "report");
  } catch (const std::exception& e) {
    std::cout << "FAIL  aborted: " << e.what() << std::endl;
    ledger.save();
    return 1;
  }
  property_suites(ledger, o);

  ledger.save();
  std::cout << (ledger.failures() == 0 ? "all criteria passed" : std::to_string(ledger.failures()) + " criteria failed")
            << std::endl;
  return ledger.failures() == 0 ? 0 : 1;
}
