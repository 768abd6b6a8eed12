#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "benford/attacks.hpp"
#include "benford/dataset.hpp"
#include "benford/detector.hpp"
#include "benford/tinynet.hpp"

namespace benford {

enum class Statistic { KS, KL, Both };

std::string to_string(Statistic statistic);

struct ExperimentSpec {
  /// Images drawn (without replacement) from the dataset.
  std::size_t sample_size = 200;
  std::vector<AttackConfig> attacks;
  Statistic statistic = Statistic::Both;
  std::uint64_t rng_seed = 0;
  /// Worker threads. Never changes any result.
  std::size_t jobs = 1;
  DetectorOptions detector;

  /// Throws std::invalid_argument if there are no attacks, sample_size is 0 or
  /// larger than the dataset, or an attack config is invalid.
  void validate(const LabeledDataset& dataset) const;
};

/// Attack identity within a report: label plus budget.
struct AttackKey {
  std::string label;
  double epsilon = 0.0;

  static AttackKey of(const AttackConfig& config) { return {config.label(), config.epsilon}; }
  friend bool operator==(const AttackKey&, const AttackKey&) = default;
};

struct StatisticSummary {
  SeparationResult separation;
  double mean_clean = 0.0;
  double mean_adversarial = 0.0;
  /// One-sided Mann-Whitney p-value for "adversarial scores are larger".
  double mann_whitney_p = 1.0;
};

struct AttackSummary {
  AttackConfig attack;
  std::size_t sampled = 0;
  /// Misclassified before any attack; logged and never attacked.
  std::size_t excluded_misclassified = 0;
  std::size_t attacked = 0;
  std::size_t succeeded = 0;
  std::size_t clean_scored = 0;        ///< non-degenerate clean records
  std::size_t adversarial_scored = 0;  ///< non-degenerate successful records
  /// Empty when either score set is empty or the statistic was not requested.
  std::optional<StatisticSummary> ks;
  std::optional<StatisticSummary> kl;
};

struct EpsilonRow {
  double epsilon = 0.0;
  std::size_t attacked = 0;
  std::size_t succeeded = 0;
  /// Successful perturbations only.
  double kl_adversarial_mean = 0.0;
  double kl_adversarial_std = 0.0;
  /// Every perturbed image, successful or not.
  double kl_perturbed_mean = 0.0;
  double kl_perturbed_std = 0.0;
  double kl_clean_mean = 0.0;
  double kl_clean_std = 0.0;

  double success_rate() const { return attacked == 0 ? 0.0 : static_cast<double>(succeeded) / attacked; }
};

struct TracePoint {
  std::size_t iteration = 0;
  double ks = 0.0;
  double kl = 0.0;
  std::size_t predicted = 0;
  bool adversarial = false;
};

struct ImageTrace {
  std::string image_id;
  std::size_t label = 0;
  /// Iteration 0 is the clean image.
  std::vector<TracePoint> points;
  std::optional<std::size_t> first_misclassified;
  /// First t >= 1 with ks[t-1] <= threshold < ks[t].
  std::optional<std::size_t> first_crossing;

  /// The score crossed the threshold strictly before the first misclassification.
  bool early_warning() const {
    return first_crossing && first_misclassified && *first_crossing < *first_misclassified;
  }
};

struct TraceSummary {
  AttackConfig attack;
  double threshold = 0.0;
  std::string threshold_source;
  std::size_t images = 0;
  std::size_t misclassified = 0;
  std::size_t early_warnings = 0;
};

struct ExperimentReport {
  /// Clean records (one per attacked image) followed by the adversarial
  /// records of each attack in spec order. Failed attacks keep their record
  /// with attack_success = false.
  std::vector<ScoreRecord> records;
  std::vector<AttackSummary> attacks;
  std::vector<EpsilonRow> epsilon_sweep;
  std::vector<ImageTrace> traces;
  std::optional<TraceSummary> trace_summary;
  /// Provenance key/value pairs, written to settings.txt.
  std::vector<std::pair<std::string, std::string>> settings;

  bool empty() const {
    return records.empty() && attacks.empty() && epsilon_sweep.empty() && traces.empty();
  }
  const AttackSummary* find(const AttackKey& key) const;
};

/// Samples, drops misclassified images, attacks the rest with every configured
/// attack, scores clean and perturbed images, and sweeps separation thresholds
/// on successful adversarial records. Per-image attack seeds come from
/// derive_seed(spec.rng_seed, "<label>/<id>").
ExperimentReport run_separation_experiment(const nn::Model& model, const LabeledDataset& dataset,
                                           const ExperimentSpec& spec);

/// FGSM at each epsilon, using spec.attacks.front() as the template (it must
/// be FGSM). Rows follow the order of `epsilons`.
ExperimentReport run_epsilon_sweep(const nn::Model& model, const LabeledDataset& dataset,
                                   const ExperimentSpec& spec, const std::vector<double>& epsilons);

/// Full-length PGD traces (no early stop, no random start) for the listed
/// image ids using spec.attacks.front(), scored at every iterate against a
/// calibrated KS threshold.
ExperimentReport run_iteration_trace(const nn::Model& model, const LabeledDataset& dataset,
                                     const ExperimentSpec& spec, const std::vector<std::string>& image_ids,
                                     double threshold, std::string threshold_source = "given");

/// Calibrates the KS threshold with an early-stopping separation run of
/// spec.attacks.front(), then traces the first `trace_count` correctly
/// classified images of that run. The returned report holds both parts.
ExperimentReport run_calibrated_trace(const nn::Model& model, const LabeledDataset& dataset,
                                      const ExperimentSpec& spec, std::size_t trace_count);

/// Rebuilds per-attack summaries from score records alone (for example read
/// back from scores.csv): every non-degenerate clean record against the
/// successful, non-degenerate records of each attack key, in first-seen order.
/// Counts that are not recoverable from records (sampled, excluded) are 0.
std::vector<AttackSummary> summaries_from_records(const std::vector<ScoreRecord>& records,
                                                  Statistic statistic = Statistic::Both);

struct CompareRow {
  AttackKey attack;
  Statistic statistic = Statistic::KS;
  double best_percentage = 0.0;
  double best_threshold = 0.0;
  /// Full-scale reference percentage for context, when one exists.
  std::optional<double> reference;
};

/// Best separation per attack and statistic (KS row, then KL row). Throws
/// std::invalid_argument if any attack lacks either statistic.
std::vector<CompareRow> compare_statistics(const ExperimentReport& report);

/// Appends `extra` into `base`. Clean records already present by image id are
/// not duplicated; settings keep the first value for each key.
void merge_reports(ExperimentReport& base, ExperimentReport extra);

/// scores.csv, separation_summary.csv, separation_curve.csv, epsilon_sweep.csv,
/// traces.csv, trace_summary.csv, compare.csv, settings.txt, plus SVG plots
/// for whatever the report contains. An empty report yields header-only CSVs,
/// no plots, and a warning. I/O errors raise std::runtime_error with the path.
void render_outputs(const ExperimentReport& report, const std::filesystem::path& output_dir);

/// Writes only scores.csv.
void write_scores_csv(const std::vector<ScoreRecord>& records, const std::filesystem::path& path);

/// Column order of scores.csv.
const std::vector<std::string>& score_columns();

/// Parses scores.csv back into records (attack fields restored for the
/// columns written; the per-image seed is not stored).
std::vector<ScoreRecord> read_scores_csv(const std::filesystem::path& path);

}  // namespace benford
