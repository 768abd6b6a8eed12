#include "benford/experiments.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "benford/csv.hpp"
#include "benford/parallel.hpp"
#include "benford/stats.hpp"
#include "benford/svg.hpp"

namespace benford {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Prepared {
  LabeledDataset sample;
  /// Indices into sample of correctly classified images.
  std::vector<std::size_t> correct;
  /// Clean records aligned with `correct`.
  std::vector<ScoreRecord> clean;
};

Prepared prepare(const nn::Model& model, const LabeledDataset& dataset, const ExperimentSpec& spec) {
  spec.validate(dataset);
  Prepared p;
  p.sample = sample_subset(dataset, spec.sample_size, spec.rng_seed);
  std::vector<std::size_t> predicted(p.sample.size());
  parallel_for(p.sample.size(), spec.jobs,
               [&](std::size_t i) { predicted[i] = model.predict(p.sample.images[i]); });
  for (std::size_t i = 0; i < p.sample.size(); ++i) {
    if (predicted[i] == p.sample.labels[i]) {
      p.correct.push_back(i);
    } else {
      spdlog::info("excluding misclassified image {} (label {}, predicted {})", p.sample.ids[i],
                   p.sample.labels[i], predicted[i]);
    }
  }
  p.clean.resize(p.correct.size());
  parallel_for(p.correct.size(), spec.jobs, [&](std::size_t k) {
    const std::size_t i = p.correct[k];
    p.clean[k] = score_image(p.sample.images[i], p.sample.ids[i], spec.detector);
  });
  return p;
}

std::vector<ScoreRecord> attack_all(const nn::Model& model, const Prepared& p, const AttackConfig& config,
                                    const ExperimentSpec& spec) {
  std::vector<ScoreRecord> out(p.correct.size());
  const std::string label = config.label();
  parallel_for(p.correct.size(), spec.jobs, [&](std::size_t k) {
    const std::size_t i = p.correct[k];
    AttackConfig per_image = config;
    per_image.rng_seed = derive_seed(spec.rng_seed, label + "/" + p.sample.ids[i]);
    const AttackOutcome outcome = run_attack(model, p.sample.images[i], p.sample.labels[i], per_image);
    ScoreRecord record = score_image(outcome.final_image, p.sample.ids[i], spec.detector);
    record.condition = Condition::Adversarial;
    record.attack = config;
    record.attack_success = outcome.success;
    out[k] = std::move(record);
  });
  return out;
}

std::vector<double> usable(const std::vector<ScoreRecord>& records, double ScoreRecord::*field,
                           bool successful_only) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.degenerate) continue;
    if (successful_only && !r.attack_success) continue;
    out.push_back(r.*field);
  }
  return out;
}

std::optional<StatisticSummary> summarize_statistic(const std::vector<double>& clean,
                                                    const std::vector<double>& adversarial) {
  if (clean.empty() || adversarial.empty()) return std::nullopt;
  StatisticSummary s;
  s.separation = separation_sweep(clean, adversarial);
  s.mean_clean = stats::mean(clean);
  s.mean_adversarial = stats::mean(adversarial);
  s.mann_whitney_p = stats::mann_whitney_greater(adversarial, clean).p_greater;
  return s;
}

AttackSummary summarize(const AttackConfig& config, const Prepared& p, const std::vector<ScoreRecord>& adv,
                        Statistic statistic) {
  AttackSummary s;
  s.attack = config;
  s.sampled = p.sample.size();
  s.excluded_misclassified = p.sample.size() - p.correct.size();
  s.attacked = adv.size();
  s.succeeded = static_cast<std::size_t>(
      std::count_if(adv.begin(), adv.end(), [](const ScoreRecord& r) { return r.attack_success; }));
  const auto clean_ks = usable(p.clean, &ScoreRecord::ks, false);
  const auto adv_ks = usable(adv, &ScoreRecord::ks, true);
  s.clean_scored = clean_ks.size();
  s.adversarial_scored = adv_ks.size();
  if (statistic != Statistic::KL) {
    s.ks = summarize_statistic(clean_ks, adv_ks);
  }
  if (statistic != Statistic::KS) {
    s.kl = summarize_statistic(usable(p.clean, &ScoreRecord::kl, false), usable(adv, &ScoreRecord::kl, true));
  }
  return s;
}

std::string fmt_bool(bool b) { return b ? "1" : "0"; }

void add_setting(ExperimentReport& report, std::string key, std::string value) {
  for (const auto& [k, v] : report.settings) {
    if (k == key) return;
  }
  report.settings.emplace_back(std::move(key), std::move(value));
}

std::string describe(const AttackConfig& c) {
  return c.label() + " epsilon=" + csv::number(c.epsilon) + " step_size=" + csv::number(c.step_size) +
         " max_iters=" + std::to_string(c.max_iters) + " random_start=" + fmt_bool(c.random_start) +
         " early_stop=" + fmt_bool(c.early_stop);
}

void record_settings(ExperimentReport& report, const ExperimentSpec& spec) {
  // jobs is left out on purpose: it never changes the results.
  add_setting(report, "sample_size", std::to_string(spec.sample_size));
  add_setting(report, "seed", std::to_string(spec.rng_seed));
  add_setting(report, "statistic", to_string(spec.statistic));
  add_setting(report, "transform_depth", std::to_string(spec.detector.transform_depth));
  add_setting(report, "scale", "eight_bit");
  add_setting(report, "separation_rule", "adversarial iff score > threshold");
}

ExperimentReport run_attacks(const nn::Model& model, const ExperimentSpec& spec,
                             const std::vector<AttackConfig>& attacks, const Prepared& p) {
  ExperimentReport report;
  report.records = p.clean;
  for (std::size_t a = 0; a < attacks.size(); ++a) {
    auto adv = attack_all(model, p, attacks[a], spec);
    report.attacks.push_back(summarize(attacks[a], p, adv, spec.statistic));
    const auto& s = report.attacks.back();
    spdlog::info("{} eps={}: {}/{} attacks succeeded ({} misclassified images excluded)", attacks[a].label(),
                 attacks[a].epsilon, s.succeeded, s.attacked, s.excluded_misclassified);
    std::move(adv.begin(), adv.end(), std::back_inserter(report.records));
  }
  record_settings(report, spec);
  return report;
}

std::string key_slug(const AttackKey& key) { return key.label + "_eps" + csv::number(key.epsilon); }

std::optional<double> reference_percentage(const std::string& label, Statistic statistic) {
  if (label == "pgd-linf") return statistic == Statistic::KS ? 0.9470 : 0.9023;
  if (label == "pgd-l2") return statistic == Statistic::KS ? 0.8179 : 0.6696;
  return std::nullopt;
}

std::filesystem::path join(const std::filesystem::path& dir, const char* name) { return dir / name; }

double parse_double(const std::string& field, const std::string& column) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw std::runtime_error("scores.csv: bad number '" + field + "' in column " + column);
  }
  return value;
}

std::size_t parse_size(const std::string& field, const std::string& column) {
  std::size_t value = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw std::runtime_error("scores.csv: bad integer '" + field + "' in column " + column);
  }
  return value;
}

void write_summary_rows(csv::Writer& out, const AttackSummary& s) {
  const std::vector<std::string> counts = {
      s.attack.label(),        csv::number(s.attack.epsilon),       "",
      std::to_string(s.sampled), std::to_string(s.excluded_misclassified), std::to_string(s.attacked),
      std::to_string(s.succeeded), std::to_string(s.clean_scored), std::to_string(s.adversarial_scored)};
  bool any = false;
  for (auto [name, stat] : {std::pair{"ks", &s.ks}, std::pair{"kl", &s.kl}}) {
    if (!*stat) continue;
    any = true;
    auto row = counts;
    row[2] = name;
    const auto& v = **stat;
    row.insert(row.end(), {csv::number(v.separation.best_threshold), csv::number(v.separation.best_percentage),
                           csv::number(v.mean_clean), csv::number(v.mean_adversarial),
                           csv::number(v.mann_whitney_p)});
    out.row(row);
  }
  if (!any) {
    auto row = counts;
    row.insert(row.end(), {"", "", "", "", ""});
    out.row(row);
  }
}

}  // namespace

std::string to_string(Statistic statistic) {
  switch (statistic) {
    case Statistic::KS: return "ks";
    case Statistic::KL: return "kl";
    case Statistic::Both: return "both";
  }
  return "both";
}

void ExperimentSpec::validate(const LabeledDataset& dataset) const {
  if (attacks.empty()) throw std::invalid_argument("experiment: no attacks configured");
  if (sample_size == 0) throw std::invalid_argument("experiment: sample_size must be positive");
  if (sample_size > dataset.size()) {
    throw std::invalid_argument("experiment: sample_size " + std::to_string(sample_size) +
                                " exceeds dataset size " + std::to_string(dataset.size()));
  }
  if (detector.transform_depth == 0) throw std::invalid_argument("experiment: transform_depth must be >= 1");
  for (const auto& a : attacks) a.validate();
}

const AttackSummary* ExperimentReport::find(const AttackKey& key) const {
  for (const auto& s : attacks) {
    if (AttackKey::of(s.attack) == key) return &s;
  }
  return nullptr;
}

ExperimentReport run_separation_experiment(const nn::Model& model, const LabeledDataset& dataset,
                                           const ExperimentSpec& spec) {
  const Prepared p = prepare(model, dataset, spec);
  ExperimentReport report = run_attacks(model, spec, spec.attacks, p);
  for (std::size_t a = 0; a < spec.attacks.size(); ++a) {
    add_setting(report, "attack." + std::to_string(a), describe(spec.attacks[a]));
  }
  return report;
}

ExperimentReport run_epsilon_sweep(const nn::Model& model, const LabeledDataset& dataset,
                                   const ExperimentSpec& spec, const std::vector<double>& epsilons) {
  if (epsilons.empty()) throw std::invalid_argument("epsilon sweep: no epsilons given");
  spec.validate(dataset);
  const AttackConfig& base = spec.attacks.front();
  if (base.method != AttackMethod::FGSM) {
    throw std::invalid_argument("epsilon sweep: the first attack must be FGSM");
  }
  std::vector<AttackConfig> attacks;
  for (double eps : epsilons) {
    AttackConfig c = base;
    c.epsilon = eps;
    c.validate();
    attacks.push_back(c);
  }
  const Prepared p = prepare(model, dataset, spec);
  ExperimentReport report = run_attacks(model, spec, attacks, p);

  const auto clean_kl = usable(p.clean, &ScoreRecord::kl, false);
  for (std::size_t e = 0; e < attacks.size(); ++e) {
    EpsilonRow row;
    row.epsilon = attacks[e].epsilon;
    row.attacked = report.attacks[e].attacked;
    row.succeeded = report.attacks[e].succeeded;
    std::vector<ScoreRecord> adv;
    for (const auto& r : report.records) {
      if (r.condition == Condition::Adversarial && r.attack && *r.attack == attacks[e]) adv.push_back(r);
    }
    const auto kl_adv = usable(adv, &ScoreRecord::kl, true);
    const auto kl_all = usable(adv, &ScoreRecord::kl, false);
    row.kl_adversarial_mean = kl_adv.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::mean(kl_adv);
    row.kl_adversarial_std = kl_adv.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::stddev(kl_adv);
    row.kl_perturbed_mean = kl_all.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::mean(kl_all);
    row.kl_perturbed_std = kl_all.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::stddev(kl_all);
    row.kl_clean_mean = clean_kl.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::mean(clean_kl);
    row.kl_clean_std = clean_kl.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::stddev(clean_kl);
    report.epsilon_sweep.push_back(row);
  }
  std::string list;
  for (double eps : epsilons) list += (list.empty() ? "" : ",") + csv::number(eps);
  add_setting(report, "sweep.attack", base.label());
  add_setting(report, "sweep.epsilons", list);
  return report;
}

ExperimentReport run_iteration_trace(const nn::Model& model, const LabeledDataset& dataset,
                                     const ExperimentSpec& spec, const std::vector<std::string>& image_ids,
                                     double threshold, std::string threshold_source) {
  if (spec.attacks.empty()) throw std::invalid_argument("trace: no attack configured");
  if (image_ids.empty()) throw std::invalid_argument("trace: no images selected");
  if (!std::isfinite(threshold)) throw std::invalid_argument("trace: threshold must be finite");
  AttackConfig config = spec.attacks.front();
  if (config.method != AttackMethod::PGD) throw std::invalid_argument("trace: attack must be PGD");
  config.early_stop = false;
  config.random_start = false;
  config.validate();
  if (spec.detector.transform_depth == 0) throw std::invalid_argument("trace: transform_depth must be >= 1");

  std::vector<std::size_t> indices;
  for (const auto& id : image_ids) indices.push_back(dataset.index_of(id));

  ExperimentReport report;
  report.traces.resize(indices.size());
  std::vector<ScoreRecord> clean(indices.size());
  parallel_for(indices.size(), spec.jobs, [&](std::size_t k) {
    const std::size_t i = indices[k];
    const ImageTensor& image = dataset.images[i];
    const std::size_t label = dataset.labels[i];
    clean[k] = score_image(image, dataset.ids[i], spec.detector);

    ImageTrace& trace = report.traces[k];
    trace.image_id = dataset.ids[i];
    trace.label = label;
    const std::size_t p0 = model.predict(image);
    trace.points.push_back({0, clean[k].ks, clean[k].kl, p0, p0 != label});

    const AttackOutcome outcome = pgd(model, image, label, config);
    for (const auto& step : outcome.trace) {
      const ScoreRecord r = score_image(step.image, trace.image_id, spec.detector);
      trace.points.push_back({step.iteration, r.ks, r.kl, step.predicted, step.predicted != label});
    }
    for (std::size_t t = 0; t < trace.points.size(); ++t) {
      if (trace.points[t].adversarial) {
        trace.first_misclassified = t;
        break;
      }
    }
    for (std::size_t t = 1; t < trace.points.size(); ++t) {
      // NaN scores (degenerate iterates) never count as a crossing.
      if (trace.points[t - 1].ks <= threshold && trace.points[t].ks > threshold) {
        trace.first_crossing = t;
        break;
      }
    }
  });
  report.records = std::move(clean);

  TraceSummary summary;
  summary.attack = config;
  summary.threshold = threshold;
  summary.threshold_source = std::move(threshold_source);
  summary.images = report.traces.size();
  for (const auto& t : report.traces) {
    if (t.first_misclassified) ++summary.misclassified;
    if (t.early_warning()) ++summary.early_warnings;
  }
  spdlog::info("trace: {} of {} images crossed the threshold {} before misclassification", summary.early_warnings,
               summary.images, threshold);
  report.trace_summary = summary;
  add_setting(report, "seed", std::to_string(spec.rng_seed));
  add_setting(report, "transform_depth", std::to_string(spec.detector.transform_depth));
  add_setting(report, "trace.attack", describe(config));
  add_setting(report, "trace.threshold", csv::number(threshold));
  add_setting(report, "trace.threshold_source", summary.threshold_source);
  return report;
}

ExperimentReport run_calibrated_trace(const nn::Model& model, const LabeledDataset& dataset,
                                      const ExperimentSpec& spec, std::size_t trace_count) {
  if (trace_count == 0) throw std::invalid_argument("trace: trace_count must be positive");
  ExperimentSpec calibration = spec;
  calibration.attacks = {spec.attacks.front()};
  calibration.attacks.front().early_stop = true;
  if (calibration.statistic == Statistic::KL) calibration.statistic = Statistic::Both;
  ExperimentReport report = run_separation_experiment(model, dataset, calibration);
  const AttackSummary& summary = report.attacks.front();
  if (!summary.ks) {
    throw std::runtime_error("trace: calibration produced no successful adversarial examples");
  }
  std::vector<std::string> ids;
  for (const auto& r : report.records) {
    if (r.condition == Condition::Clean && ids.size() < trace_count) ids.push_back(r.image_id);
  }
  if (ids.size() < trace_count) {
    spdlog::warn("trace: only {} correctly classified images available (asked for {})", ids.size(), trace_count);
  }
  const auto& sep = summary.ks->separation;
  const std::string source = "calibrated on " + summary.attack.label() + " eps " +
                             csv::number(summary.attack.epsilon) + " separation " +
                             csv::number(sep.best_percentage);
  merge_reports(report, run_iteration_trace(model, dataset, spec, ids, sep.best_threshold, source));
  return report;
}

std::vector<AttackSummary> summaries_from_records(const std::vector<ScoreRecord>& records, Statistic statistic) {
  std::vector<ScoreRecord> clean;
  std::vector<AttackKey> keys;
  std::vector<AttackConfig> configs;
  for (const auto& r : records) {
    if (r.condition == Condition::Clean) {
      clean.push_back(r);
    } else if (r.attack) {
      const AttackKey key = AttackKey::of(*r.attack);
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        keys.push_back(key);
        configs.push_back(*r.attack);
      }
    }
  }
  std::vector<AttackSummary> out;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    std::vector<ScoreRecord> adv;
    for (const auto& r : records) {
      if (r.condition == Condition::Adversarial && r.attack && AttackKey::of(*r.attack) == keys[k]) adv.push_back(r);
    }
    Prepared p;
    p.clean = clean;
    AttackSummary s = summarize(configs[k], p, adv, statistic);
    s.sampled = 0;
    s.excluded_misclassified = 0;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CompareRow> compare_statistics(const ExperimentReport& report) {
  std::vector<CompareRow> rows;
  for (const auto& s : report.attacks) {
    if (!s.ks || !s.kl) {
      throw std::invalid_argument("compare: attack " + s.attack.label() + " lacks " + (s.ks ? "KL" : "KS") +
                                  " separation results");
    }
    const AttackKey key = AttackKey::of(s.attack);
    for (auto [stat, sum] : {std::pair{Statistic::KS, &*s.ks}, std::pair{Statistic::KL, &*s.kl}}) {
      rows.push_back({key, stat, sum->separation.best_percentage, sum->separation.best_threshold,
                      reference_percentage(key.label, stat)});
    }
  }
  return rows;
}

void merge_reports(ExperimentReport& base, ExperimentReport extra) {
  for (auto& r : extra.records) {
    if (r.condition == Condition::Clean) {
      const bool seen = std::any_of(base.records.begin(), base.records.end(), [&](const ScoreRecord& b) {
        return b.condition == Condition::Clean && b.image_id == r.image_id;
      });
      if (seen) continue;
    }
    base.records.push_back(std::move(r));
  }
  std::move(extra.attacks.begin(), extra.attacks.end(), std::back_inserter(base.attacks));
  std::move(extra.epsilon_sweep.begin(), extra.epsilon_sweep.end(), std::back_inserter(base.epsilon_sweep));
  std::move(extra.traces.begin(), extra.traces.end(), std::back_inserter(base.traces));
  if (!base.trace_summary) base.trace_summary = std::move(extra.trace_summary);
  for (auto& [k, v] : extra.settings) add_setting(base, std::move(k), std::move(v));
}

const std::vector<std::string>& score_columns() {
  static const std::vector<std::string> columns = {
      "image_id", "condition", "attack", "norm", "epsilon", "step_size", "max_iters", "random_start",
      "early_stop", "attack_success", "status", "ks", "kl", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8",
      "p9", "support_count"};
  return columns;
}

void write_scores_csv(const std::vector<ScoreRecord>& records, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.row(score_columns());
  for (const auto& r : records) {
    std::vector<std::string> row = {r.image_id, to_string(r.condition)};
    if (r.attack) {
      const auto& a = *r.attack;
      row.insert(row.end(), {a.label(), to_string(a.norm), csv::number(a.epsilon), csv::number(a.step_size),
                             std::to_string(a.max_iters), fmt_bool(a.random_start), fmt_bool(a.early_stop),
                             fmt_bool(r.attack_success)});
    } else {
      row.insert(row.end(), {"", "", "", "", "", "", "", ""});
    }
    row.push_back(r.degenerate ? "degenerate" : "ok");
    row.push_back(csv::number(r.ks));
    row.push_back(csv::number(r.kl));
    for (double p : r.digit_probs) row.push_back(csv::number(p));
    row.push_back(std::to_string(r.support_count));
    out.row(row);
  }
  out.close();
}

void render_outputs(const ExperimentReport& report, const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory " + output_dir.string() + ": " + ec.message());
  }
  if (report.empty()) {
    spdlog::warn("report is empty: writing header-only CSVs and no plots to {}", output_dir.string());
  }

  write_scores_csv(report.records, join(output_dir, "scores.csv"));
  {
    csv::Writer out(join(output_dir, "separation_summary.csv"));
    out.row({"attack", "epsilon", "statistic", "sampled", "excluded_misclassified", "attacked", "succeeded",
             "clean_scored", "adversarial_scored", "best_threshold", "best_percentage", "mean_clean",
             "mean_adversarial", "mann_whitney_p"});
    for (const auto& s : report.attacks) write_summary_rows(out, s);
    out.close();
  }
  {
    csv::Writer out(join(output_dir, "separation_curve.csv"));
    out.row({"attack", "epsilon", "statistic", "threshold", "percentage"});
    for (const auto& s : report.attacks) {
      for (auto [name, stat] : {std::pair{"ks", &s.ks}, std::pair{"kl", &s.kl}}) {
        if (!*stat) continue;
        for (const auto& pt : (*stat)->separation.curve) {
          out.row({s.attack.label(), csv::number(s.attack.epsilon), name, csv::number(pt.threshold),
                   csv::number(pt.percentage)});
        }
      }
    }
    out.close();
  }
  {
    csv::Writer out(join(output_dir, "epsilon_sweep.csv"));
    out.row({"epsilon", "attacked", "succeeded", "success_rate", "kl_adversarial_mean", "kl_adversarial_std",
             "kl_perturbed_mean", "kl_perturbed_std", "kl_clean_mean", "kl_clean_std"});
    for (const auto& r : report.epsilon_sweep) {
      out.row({csv::number(r.epsilon), std::to_string(r.attacked), std::to_string(r.succeeded),
               csv::number(r.success_rate()), csv::number(r.kl_adversarial_mean),
               csv::number(r.kl_adversarial_std), csv::number(r.kl_perturbed_mean),
               csv::number(r.kl_perturbed_std), csv::number(r.kl_clean_mean), csv::number(r.kl_clean_std)});
    }
    out.close();
  }
  {
    csv::Writer out(join(output_dir, "traces.csv"));
    out.row({"image_id", "label", "iteration", "ks", "kl", "predicted", "adversarial"});
    for (const auto& t : report.traces) {
      for (const auto& pt : t.points) {
        out.row({t.image_id, std::to_string(t.label), std::to_string(pt.iteration), csv::number(pt.ks),
                 csv::number(pt.kl), std::to_string(pt.predicted), fmt_bool(pt.adversarial)});
      }
    }
    out.close();
  }
  {
    csv::Writer out(join(output_dir, "trace_summary.csv"));
    out.row({"attack", "epsilon", "step_size", "max_iters", "threshold", "threshold_source", "images",
             "misclassified", "early_warnings"});
    if (const auto& s = report.trace_summary) {
      out.row({s->attack.label(), csv::number(s->attack.epsilon), csv::number(s->attack.step_size),
               std::to_string(s->attack.max_iters), csv::number(s->threshold), s->threshold_source,
               std::to_string(s->images), std::to_string(s->misclassified), std::to_string(s->early_warnings)});
    }
    out.close();
  }
  {
    csv::Writer out(join(output_dir, "compare.csv"));
    out.row({"attack", "epsilon", "statistic", "best_percentage", "best_threshold", "reference_percentage"});
    const bool complete = !report.attacks.empty() &&
                          std::all_of(report.attacks.begin(), report.attacks.end(),
                                      [](const AttackSummary& s) { return s.ks && s.kl; });
    if (complete) {
      for (const auto& row : compare_statistics(report)) {
        out.row({row.attack.label, csv::number(row.attack.epsilon), to_string(row.statistic),
                 csv::number(row.best_percentage), csv::number(row.best_threshold),
                 row.reference ? csv::number(*row.reference) : ""});
      }
    } else if (!report.attacks.empty()) {
      spdlog::warn("compare.csv left empty: some attacks lack KS or KL separation results");
    }
    out.close();
  }
  {
    const auto path = join(output_dir, "settings.txt");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& [k, v] : report.settings) out << k << " = " << v << '\n';
    out.close();
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }

  if (report.empty()) return;

  for (const auto& s : report.attacks) {
    if (!s.ks) continue;
    const AttackKey key = AttackKey::of(s.attack);
    std::vector<svg::Point> clean;
    std::vector<svg::Point> adv;
    for (const auto& r : report.records) {
      if (r.degenerate) continue;
      if (r.condition == Condition::Clean) {
        clean.push_back({static_cast<double>(clean.size()), r.ks});
      } else if (r.attack && AttackKey::of(*r.attack) == key && r.attack_success) {
        adv.push_back({static_cast<double>(adv.size()), r.ks});
      }
    }
    svg::Figure fig;
    fig.title = "KS against Benford: " + key.label + " (eps " + csv::number(key.epsilon) + ")";
    fig.x_label = "image index";
    fig.y_label = "KS statistic";
    fig.scatter("clean", kPalette[0], std::move(clean));
    fig.scatter("adversarial", kPalette[1], std::move(adv));
    fig.horizontal_rule(s.ks->separation.best_threshold,
                        "threshold (" + csv::number(std::round(s.ks->separation.best_percentage * 1e4) / 100) +
                            "%)");
    svg::write(fig, output_dir / ("ks_scatter_" + key_slug(key) + ".svg"));
  }

  for (auto [name, member] : {std::pair{"ks", &AttackSummary::ks}, std::pair{"kl", &AttackSummary::kl}}) {
    svg::Figure fig;
    fig.title = std::string("Separation percentage (") + name + ")";
    fig.x_label = "threshold";
    fig.y_label = "separation percentage";
    std::size_t color = 0;
    for (const auto& s : report.attacks) {
      const auto& stat = s.*member;
      if (!stat) continue;
      std::vector<svg::Point> pts;
      for (const auto& pt : stat->separation.curve) pts.push_back({pt.threshold, 100.0 * pt.percentage});
      const AttackKey key = AttackKey::of(s.attack);
      fig.line(key.label + " eps " + csv::number(key.epsilon), kPalette[color++ % 10], std::move(pts));
    }
    if (!fig.series.empty()) {
      svg::write(fig, output_dir / (std::string("separation_curve_") + name + ".svg"));
    }
  }

  if (!report.epsilon_sweep.empty()) {
    svg::Figure fig;
    fig.title = "KL divergence against Benford vs. epsilon (FGSM)";
    fig.x_label = "epsilon";
    fig.y_label = "KL divergence";
    std::vector<svg::Point> adv, clean;
    std::vector<double> adv_err, clean_err;
    for (const auto& r : report.epsilon_sweep) {
      if (std::isfinite(r.kl_adversarial_mean)) {
        adv.push_back({r.epsilon, r.kl_adversarial_mean});
        adv_err.push_back(r.kl_adversarial_std);
      }
      if (std::isfinite(r.kl_clean_mean)) {
        clean.push_back({r.epsilon, r.kl_clean_mean});
        clean_err.push_back(r.kl_clean_std);
      }
    }
    fig.error_bars("adversarial", kPalette[1], std::move(adv), std::move(adv_err));
    fig.error_bars("clean", kPalette[0], std::move(clean), std::move(clean_err));
    svg::write(fig, output_dir / "kl_vs_epsilon.svg");
  }

  if (!report.traces.empty()) {
    svg::Figure fig;
    fig.title = "KS along the attack iterations";
    fig.x_label = "iteration";
    fig.y_label = "KS statistic";
    std::size_t color = 0;
    for (const auto& t : report.traces) {
      std::vector<svg::Point> pts;
      for (const auto& pt : t.points) {
        if (std::isfinite(pt.ks)) pts.push_back({static_cast<double>(pt.iteration), pt.ks});
      }
      // Only the first ten traces get a legend entry.
      fig.line(color < 10 ? t.image_id : "", kPalette[color % 10], std::move(pts));
      ++color;
    }
    if (report.trace_summary) fig.horizontal_rule(report.trace_summary->threshold, "separation limit");
    svg::write(fig, output_dir / "ks_trace.svg");
  }
}

std::vector<ScoreRecord> read_scores_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  if (table.empty() || table.front() != score_columns()) {
    throw std::runtime_error(path.string() + ": unexpected scores.csv header");
  }
  const auto& cols = score_columns();
  std::vector<ScoreRecord> out;
  for (std::size_t n = 1; n < table.size(); ++n) {
    const auto& row = table[n];
    if (row.size() != cols.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(n) + " has " +
                               std::to_string(row.size()) + " fields");
    }
    ScoreRecord r;
    r.image_id = row[0];
    if (row[1] == "clean") {
      r.condition = Condition::Clean;
    } else if (row[1] == "adversarial") {
      r.condition = Condition::Adversarial;
    } else {
      throw std::runtime_error(path.string() + ": unknown condition '" + row[1] + "'");
    }
    if (!row[2].empty()) {
      AttackConfig a;
      if (row[2] == "fgsm") {
        a.method = AttackMethod::FGSM;
      } else if (row[2] == "pgd-linf" || row[2] == "pgd-l2") {
        a.method = AttackMethod::PGD;
      } else {
        throw std::runtime_error(path.string() + ": unknown attack '" + row[2] + "'");
      }
      a.norm = row[3] == "l2" ? Norm::L2 : Norm::Linf;
      a.epsilon = parse_double(row[4], cols[4]);
      a.step_size = parse_double(row[5], cols[5]);
      a.max_iters = parse_size(row[6], cols[6]);
      a.random_start = row[7] == "1";
      a.early_stop = row[8] == "1";
      r.attack = a;
      r.attack_success = row[9] == "1";
    }
    r.degenerate = row[10] == "degenerate";
    r.ks = parse_double(row[11], cols[11]);
    r.kl = parse_double(row[12], cols[12]);
    for (std::size_t d = 0; d < 9; ++d) r.digit_probs[d] = parse_double(row[13 + d], cols[13 + d]);
    r.support_count = parse_size(row[22], cols[22]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace benford
