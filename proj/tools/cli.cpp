#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "benford/checkpoint.hpp"
#include "benford/csv.hpp"
#include "benford/experiments.hpp"
#include "benford/idx.hpp"
#include "benford/parallel.hpp"
#include "benford/png_io.hpp"
#include "benford/stats.hpp"
#include "benford/train.hpp"

#ifndef BENFORD_DEFAULT_MNIST_DIR
#define BENFORD_DEFAULT_MNIST_DIR "data/mnist-desk"
#endif

namespace benford::cli {

namespace {

/// Bad flag values or combinations detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct Options {
  // common
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string config;
  std::size_t jobs = default_jobs();
  bool verbose = false;

  // data
  std::string dataset = "mnist";
  std::string data_dir = BENFORD_DEFAULT_MNIST_DIR;
  std::string split = "test";
  std::string input;
  std::string target_shape;
  std::size_t n = 200;

  // model
  std::string checkpoint;

  // attack
  std::string attack;
  double eps = kUnset;
  double step = kUnset;
  std::size_t iters = 40;
  bool no_random_start = false;
  bool no_early_stop = false;

  // detector / experiments
  std::size_t transform_depth = 1;
  std::string statistic = "both";
  std::string sweep_eps = "0.1,0.2,0.5";
  bool skip_epsilon_sweep = false;
  std::size_t trace_count = 50;
  double threshold = kUnset;
  std::string from_scores;

  // train
  std::size_t train_size = 8000;
  std::size_t held_out_size = 1000;
  std::size_t epochs = 6;
  std::size_t batch_size = 32;
  std::string optimizer = "adam";
  double lr = 1e-3;
  double momentum = 0.9;

  // synth
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 1;
  double decades = 4.0;
};

const std::vector<std::string> kSubcommands = {"train", "attack", "score", "sweep", "trace", "compare", "synth"};

void add_common(CLI::App& sub, Options& o) {
  sub.add_option("--seed", o.seed, "Base random seed")->capture_default_str();
  sub.add_option("--out-dir", o.out_dir, "Directory for every output file")->capture_default_str();
  sub.add_option("--config", o.config,
                 "Config file of 'key = value' lines (# comments); keys are flag names, flags win");
  sub.add_option("--jobs", o.jobs, "Worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub.add_flag("--verbose", o.verbose, "Log progress to standard error");
}

void add_data(CLI::App& sub, Options& o, std::size_t default_n) {
  o.n = default_n;
  sub.add_option("--dataset", o.dataset, "Image source: mnist, png or synth")
      ->capture_default_str()
      ->check(CLI::IsMember({"mnist", "png", "synth"}));
  sub.add_option("--data-dir", o.data_dir, "Directory holding the MNIST IDX files (.gz accepted)")
      ->capture_default_str();
  sub.add_option("--split", o.split, "MNIST split to draw from: train or test")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "test"}));
  sub.add_option("--input", o.input, "PNG directory (one subdirectory per class) for --dataset png");
  sub.add_option("--target-shape", o.target_shape, "Centre-crop or pad PNGs to HxW, e.g. 32x32");
  sub.add_option("-n,--n", o.n, "Number of images sampled (synth: images generated)")->capture_default_str();
}

void add_checkpoint(CLI::App& sub, Options& o) {
  sub.add_option("--checkpoint", o.checkpoint, "Model checkpoint written by 'train'")->required();
}

void add_attack(CLI::App& sub, Options& o, const std::string& default_attack, bool list) {
  o.attack = default_attack;
  sub.add_option("--attack", o.attack,
                 list ? "Comma-separated attacks among fgsm, pgd-linf, pgd-l2" : "Attack: fgsm, pgd-linf or pgd-l2")
      ->capture_default_str();
  sub.add_option("--eps", o.eps, "Perturbation budget on the [0,1] scale (default 0.2, or 2.0 for pgd-l2)");
  sub.add_option("--step", o.step, "PGD step size (default eps/10)");
  sub.add_option("--iters", o.iters, "PGD iterations")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_flag("--no-random-start", o.no_random_start, "Start PGD at the clean image");
  sub.add_flag("--no-early-stop", o.no_early_stop, "Run every PGD iteration even after success");
}

void add_detector(CLI::App& sub, Options& o) {
  sub.add_option("--transform-depth", o.transform_depth, "Times the gradient-magnitude transform is applied")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void add_statistic(CLI::App& sub, Options& o) {
  sub.add_option("--statistic", o.statistic, "Separation statistic: ks, kl or both")
      ->capture_default_str()
      ->check(CLI::IsMember({"ks", "kl", "both"}));
}

using OptionSet = std::map<std::string, Options>;

/// Each subcommand binds its own Options so per-subcommand defaults stay independent.
std::unique_ptr<CLI::App> build_app(OptionSet& set) {
  auto app = std::make_unique<CLI::App>("Benford's-law detector for adversarial images", "benford");
  app->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app->require_subcommand(1);
  app->get_formatter()->column_width(34);

  Options* o = nullptr;
  auto* train = app->add_subcommand("train", "Train the desk-scale CNN on MNIST and save a checkpoint");
  o = &set["train"];
  add_common(*train, *o);
  train->add_option("--data-dir", o->data_dir, "Directory holding the MNIST IDX files (.gz accepted)")
      ->capture_default_str();
  train->add_option("--train-size", o->train_size, "Training images sampled from the train split")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--held-out-size", o->held_out_size, "Held-out images sampled from the test split")
      ->capture_default_str();
  train->add_option("--epochs", o->epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--batch-size", o->batch_size, "Mini-batch size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--optimizer", o->optimizer, "adam or sgd (with momentum)")
      ->capture_default_str()
      ->check(CLI::IsMember({"adam", "sgd"}));
  train->add_option("--lr", o->lr, "Learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  train->add_option("--momentum", o->momentum, "Momentum for sgd")->capture_default_str()->check(
      CLI::Range(0.0, 1.0));
  train->add_option("--checkpoint", o->checkpoint, "Checkpoint path (default <out-dir>/model.bnet)");

  auto* attack = app->add_subcommand("attack", "Attack sampled images; write adversarial PNGs and outcomes.csv");
  o = &set["attack"];
  add_common(*attack, *o);
  add_data(*attack, *o, 20);
  add_checkpoint(*attack, *o);
  add_attack(*attack, *o, "pgd-linf", false);

  auto* score = app->add_subcommand("score", "Score images against Benford's law; write scores.csv");
  o = &set["score"];
  add_common(*score, *o);
  add_data(*score, *o, 0);
  score->get_option("--n")->description("Number of images sampled; 0 scores every image");
  add_detector(*score, *o);

  auto* sweep = app->add_subcommand("sweep", "Separation experiment plus FGSM epsilon sweep, with plots");
  o = &set["sweep"];
  add_common(*sweep, *o);
  add_data(*sweep, *o, 200);
  add_checkpoint(*sweep, *o);
  add_attack(*sweep, *o, "pgd-linf,pgd-l2", true);
  add_detector(*sweep, *o);
  add_statistic(*sweep, *o);
  sweep->add_option("--sweep-eps", o->sweep_eps, "Comma-separated FGSM budgets for the epsilon sweep")
      ->capture_default_str();
  sweep->add_flag("--skip-epsilon-sweep", o->skip_epsilon_sweep, "Run only the separation experiment");

  auto* trace = app->add_subcommand("trace", "KS along full-length PGD iterations against a calibrated threshold");
  o = &set["trace"];
  add_common(*trace, *o);
  add_data(*trace, *o, 200);
  trace->get_option("--n")->description("Images sampled for threshold calibration");
  add_checkpoint(*trace, *o);
  add_attack(*trace, *o, "pgd-l2", false);
  add_detector(*trace, *o);
  trace->add_option("--trace-count", o->trace_count, "Correctly classified images traced")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  trace->add_option("--threshold", o->threshold, "Use this KS threshold instead of calibrating one");

  auto* compare = app->add_subcommand("compare", "Best separation for KS vs. KL per attack; write compare.csv");
  o = &set["compare"];
  add_common(*compare, *o);
  add_data(*compare, *o, 200);
  compare->add_option("--checkpoint", o->checkpoint, "Model checkpoint written by 'train'");
  add_attack(*compare, *o, "pgd-linf,pgd-l2", true);
  add_detector(*compare, *o);
  compare->add_option("--from-scores", o->from_scores, "Recompute from an existing scores.csv instead");

  auto* synth = app->add_subcommand("synth", "Generate a synthetic Benford-conformant corpus as PNGs");
  o = &set["synth"];
  add_common(*synth, *o);
  synth->add_option("-n,--n", o->n, "Images generated")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--height", o->height, "Image height")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--width", o->width, "Image width")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--channels", o->channels, "1 or 3")->capture_default_str()->check(CLI::IsMember({1, 3}));
  synth->add_option("--decades", o->decades, "Decades spanned by the amplitude ramp")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_detector(*synth, *o);
  return app;
}

// ---- config file ----------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::vector<std::string> args;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") {
      throw UsageError(path + ":" + std::to_string(lineno) + ": invalid key '" + key + "'");
    }
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

/// Places config entries right after the subcommand so later flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty() || args[0].starts_with("-")) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::vector<std::string> out = {args[0]};
  for (auto& a : read_config(path)) out.push_back(std::move(a));
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

// ---- helpers --------------------------------------------------------------

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("invalid " + what + " '" + s + "'");
  }
}

AttackConfig make_attack(const std::string& label, const Options& o) {
  AttackConfig c;
  if (label == "fgsm") {
    c = AttackConfig::fgsm(std::isnan(o.eps) ? 0.2 : o.eps);
  } else if (label == "pgd-linf") {
    c = AttackConfig::pgd(Norm::Linf, std::isnan(o.eps) ? 0.2 : o.eps);
  } else if (label == "pgd-l2") {
    c = AttackConfig::pgd(Norm::L2, std::isnan(o.eps) ? 2.0 : o.eps);
  } else {
    throw UsageError("unknown attack '" + label + "' (expected fgsm, pgd-linf or pgd-l2)");
  }
  if (c.method == AttackMethod::PGD) {
    if (!std::isnan(o.step)) c.step_size = o.step;
    c.max_iters = o.iters;
    c.random_start = !o.no_random_start;
    c.early_stop = !o.no_early_stop;
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

std::vector<AttackConfig> make_attacks(const Options& o) {
  std::vector<AttackConfig> out;
  for (const auto& label : split_list(o.attack)) out.push_back(make_attack(label, o));
  if (out.empty()) throw UsageError("--attack must name at least one attack");
  return out;
}

Statistic parse_statistic(const std::string& s) {
  return s == "ks" ? Statistic::KS : s == "kl" ? Statistic::KL : Statistic::Both;
}

std::optional<std::pair<std::size_t, std::size_t>> parse_shape(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t a = 0;
    std::size_t b = 0;
    const long h = std::stol(s.substr(0, x), &a);
    const long w = std::stol(s.substr(x + 1), &b);
    if (a != x || b != s.size() - x - 1 || h <= 0 || w <= 0) throw std::invalid_argument(s);
    return std::pair<std::size_t, std::size_t>(h, w);
  } catch (const std::exception&) {
    throw UsageError("invalid --target-shape '" + s + "' (expected HxW)");
  }
}

struct LoadedData {
  LabeledDataset dataset;
  std::vector<ManifestEntry> manifest;
  std::vector<std::pair<std::string, std::string>> settings;
};

LoadedData load_data(const Options& o) {
  LoadedData d;
  d.settings.emplace_back("dataset", o.dataset);
  if (o.dataset == "mnist") {
    auto splits = load_mnist_dir(o.data_dir);
    d.dataset = o.split == "train" ? std::move(splits.train) : std::move(splits.test);
    d.settings.emplace_back("data_dir", o.data_dir);
    d.settings.emplace_back("split", o.split);
  } else if (o.dataset == "png") {
    if (o.input.empty()) throw UsageError("--dataset png requires --input <directory>");
    PngDirOptions opts;
    opts.target_shape = parse_shape(o.target_shape);
    auto dir = load_png_dir(o.input, opts);
    d.dataset = std::move(dir.dataset);
    d.manifest = std::move(dir.manifest);
    d.settings.emplace_back("input", o.input);
    if (!o.target_shape.empty()) d.settings.emplace_back("target_shape", o.target_shape);
  } else {
    d.dataset = synth_benford_corpus(o.n == 0 ? 100 : o.n, {64, 64, 1}, o.seed);
    d.settings.emplace_back("synth_shape", "64x64x1");
  }
  if (d.dataset.empty()) throw std::runtime_error("dataset holds no images");
  return d;
}

LabeledDataset sample_n(const LabeledDataset& data, std::size_t n, std::uint64_t seed) {
  if (n > data.size()) {
    throw UsageError("-n " + std::to_string(n) + " exceeds the dataset size " + std::to_string(data.size()));
  }
  return n == 0 ? data : sample_subset(data, n, seed);
}

nn::Model load_model(const Options& o, const LabeledDataset& data) {
  nn::Model model = nn::load_checkpoint(o.checkpoint);
  const auto& img = data.images.front();
  const auto& s = model.input_shape();
  if (s.height != img.height() || s.width != img.width() || s.channels != img.channels()) {
    throw std::runtime_error("checkpoint expects " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                             "x" + std::to_string(s.channels) + " images but the dataset has " +
                             std::to_string(img.height()) + "x" + std::to_string(img.width()) + "x" +
                             std::to_string(img.channels()));
  }
  return model;
}

std::filesystem::path out_dir(const Options& o) {
  std::filesystem::path dir(o.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::string safe_name(std::string id) {
  for (char& c : id) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return id;
}

void write_settings(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string percent(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * p);
  return buf;
}

// ---- subcommands ----------------------------------------------------------

int cmd_train(const Options& o, std::ostream& out) {
  auto splits = load_mnist_dir(o.data_dir);
  if (o.train_size > splits.train.size()) {
    throw UsageError("--train-size exceeds the " + std::to_string(splits.train.size()) + " training images");
  }
  if (o.held_out_size > splits.test.size()) {
    throw UsageError("--held-out-size exceeds the " + std::to_string(splits.test.size()) + " test images");
  }
  const LabeledDataset train = sample_subset(splits.train, o.train_size, o.seed);
  const LabeledDataset held = sample_subset(splits.test, o.held_out_size, o.seed);

  const auto& first = train.images.front();
  nn::Model model = nn::Model::desk_cnn({first.height(), first.width(), first.channels()}, train.class_count);
  model.initialize(o.seed);

  nn::TrainConfig config;
  if (o.optimizer == "adam") {
    nn::Adam adam;
    adam.learning_rate = o.lr;
    config.optimizer = adam;
  } else {
    config.optimizer = nn::SgdMomentum{o.lr, o.momentum};
  }
  config.epochs = o.epochs;
  config.batch_size = o.batch_size;
  config.rng_seed = o.seed;
  config.jobs = o.jobs;
  const nn::TrainResult result = nn::train(std::move(model), train.view(), config, held.view());

  const auto dir = out_dir(o);
  const std::filesystem::path ckpt = o.checkpoint.empty() ? dir / "model.bnet" : std::filesystem::path(o.checkpoint);
  nn::save_checkpoint(result.model, ckpt);

  csv::Writer metrics(dir / "metrics.csv");
  metrics.row({"epoch", "train_loss", "train_accuracy", "held_out_accuracy"});
  for (const auto& m : result.log) {
    metrics.row({std::to_string(m.epoch), csv::number(m.train_loss), csv::number(m.train_accuracy),
                 m.held_out_accuracy < 0 ? "" : csv::number(m.held_out_accuracy)});
    out << "epoch " << m.epoch << ": loss " << m.train_loss << ", train accuracy " << percent(m.train_accuracy);
    if (m.held_out_accuracy >= 0) out << ", held-out accuracy " << percent(m.held_out_accuracy);
    out << '\n';
  }
  metrics.close();
  write_settings(dir / "settings.txt",
                 {{"data_dir", o.data_dir},
                  {"train_size", std::to_string(o.train_size)},
                  {"held_out_size", std::to_string(o.held_out_size)},
                  {"epochs", std::to_string(o.epochs)},
                  {"batch_size", std::to_string(o.batch_size)},
                  {"optimizer", o.optimizer},
                  {"lr", csv::number(o.lr)},
                  {"momentum", csv::number(o.momentum)},
                  {"seed", std::to_string(o.seed)},
                  {"checkpoint", ckpt.string()}});
  out << "checkpoint written to " << ckpt.string() << '\n';
  return kOk;
}

int cmd_attack(const Options& o, std::ostream& out) {
  const AttackConfig config = make_attack(o.attack, o);
  const LoadedData data = load_data(o);
  const LabeledDataset sample = sample_n(data.dataset, o.n, o.seed);
  const nn::Model model = load_model(o, sample);
  const auto dir = out_dir(o);
  const auto img_dir = dir / "adversarial";
  std::filesystem::create_directories(img_dir);

  struct Row {
    std::size_t clean_pred = 0;
    AttackOutcome outcome;
    std::string file;
  };
  std::vector<Row> rows(sample.size());
  const std::string label = config.label();
  parallel_for(sample.size(), o.jobs, [&](std::size_t i) {
    AttackConfig c = config;
    c.rng_seed = derive_seed(o.seed, label + "/" + sample.ids[i]);
    rows[i].clean_pred = model.predict(sample.images[i]);
    rows[i].outcome = run_attack(model, sample.images[i], sample.labels[i], c);
    rows[i].file = "adversarial/" + safe_name(sample.ids[i]) + (sample.ids[i].ends_with(".png") ? "" : ".png");
    encode_png(rows[i].outcome.final_image, dir / rows[i].file);
  });

  csv::Writer csv(dir / "outcomes.csv");
  csv.row({"image_id", "label", "clean_prediction", "adversarial_prediction", "success", "iterations",
           "linf_distance", "l2_distance", "file"});
  std::size_t succeeded = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& r = rows[i];
    succeeded += r.outcome.success;
    csv.row({sample.ids[i], std::to_string(sample.labels[i]), std::to_string(r.clean_pred),
             std::to_string(model.predict(r.outcome.final_image)), r.outcome.success ? "1" : "0",
             std::to_string(r.outcome.iterations_used),
             csv::number(distance(r.outcome.final_image, sample.images[i], Norm::Linf)),
             csv::number(distance(r.outcome.final_image, sample.images[i], Norm::L2)), r.file});
  }
  csv.close();
  auto settings = data.settings;
  settings.insert(settings.end(), {{"checkpoint", o.checkpoint},
                                   {"n", std::to_string(o.n)},
                                   {"seed", std::to_string(o.seed)},
                                   {"attack", label},
                                   {"epsilon", csv::number(config.epsilon)},
                                   {"step_size", csv::number(config.step_size)},
                                   {"max_iters", std::to_string(config.max_iters)},
                                   {"random_start", config.random_start ? "1" : "0"},
                                   {"early_stop", config.early_stop ? "1" : "0"}});
  write_settings(dir / "settings.txt", settings);
  out << label << ": " << succeeded << " of " << sample.size() << " images misclassified after the attack\n";
  return kOk;
}

int cmd_score(const Options& o, std::ostream& out) {
  const LoadedData data = load_data(o);
  const LabeledDataset sample = sample_n(data.dataset, o.dataset == "synth" ? 0 : o.n, o.seed);
  DetectorOptions det;
  det.transform_depth = o.transform_depth;
  std::vector<ScoreRecord> records(sample.size());
  parallel_for(sample.size(), o.jobs,
               [&](std::size_t i) { records[i] = score_image(sample.images[i], sample.ids[i], det); });
  std::size_t degenerate = 0;
  std::vector<double> ks;
  for (const auto& r : records) {
    if (r.degenerate) {
      ++degenerate;
      spdlog::warn("{}: degenerate image (no non-zero gradient magnitude); recorded without a score", r.image_id);
    } else {
      ks.push_back(r.ks);
    }
  }
  const auto dir = out_dir(o);
  write_scores_csv(records, dir / "scores.csv");
  if (!data.manifest.empty()) write_manifest_csv(data.manifest, dir / "manifest.csv");
  auto settings = data.settings;
  settings.insert(settings.end(), {{"n", std::to_string(o.n)},
                                   {"seed", std::to_string(o.seed)},
                                   {"transform_depth", std::to_string(o.transform_depth)}});
  write_settings(dir / "settings.txt", settings);
  out << "scored " << records.size() << " images (" << degenerate << " degenerate)";
  if (!ks.empty()) out << ", mean KS " << stats::mean(ks);
  out << '\n';
  return kOk;
}

ExperimentSpec make_spec(const Options& o, std::vector<AttackConfig> attacks) {
  ExperimentSpec spec;
  spec.sample_size = o.n;
  spec.attacks = std::move(attacks);
  spec.statistic = parse_statistic(o.statistic);
  spec.rng_seed = o.seed;
  spec.jobs = o.jobs;
  spec.detector.transform_depth = o.transform_depth;
  return spec;
}

void add_settings(ExperimentReport& report, const Options& o, const LoadedData& data) {
  std::vector<std::pair<std::string, std::string>> kv = data.settings;
  if (!o.checkpoint.empty()) kv.emplace_back("checkpoint", o.checkpoint);
  kv.insert(kv.end(), report.settings.begin(), report.settings.end());
  report.settings = std::move(kv);
}

void print_summaries(const ExperimentReport& report, std::ostream& out) {
  for (const auto& s : report.attacks) {
    out << s.attack.label() << " eps " << s.attack.epsilon << ": " << s.succeeded << "/" << s.attacked
        << " attacks succeeded";
    if (s.ks) out << "; KS separation " << percent(s.ks->separation.best_percentage);
    if (s.kl) out << "; KL separation " << percent(s.kl->separation.best_percentage);
    out << '\n';
  }
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const auto attacks = make_attacks(o);
  std::vector<double> sweep_eps;
  if (!o.skip_epsilon_sweep) {
    for (const auto& s : split_list(o.sweep_eps)) sweep_eps.push_back(parse_number(s, "--sweep-eps value"));
    if (sweep_eps.empty()) throw UsageError("--sweep-eps is empty (use --skip-epsilon-sweep)");
  }
  const LoadedData data = load_data(o);
  if (o.n == 0 || o.n > data.dataset.size()) {
    throw UsageError("-n must be between 1 and the dataset size " + std::to_string(data.dataset.size()));
  }
  const nn::Model model = load_model(o, data.dataset);

  ExperimentReport report = run_separation_experiment(model, data.dataset, make_spec(o, attacks));
  if (!sweep_eps.empty()) {
    merge_reports(report, run_epsilon_sweep(model, data.dataset, make_spec(o, {AttackConfig::fgsm(0.0)}), sweep_eps));
  }
  add_settings(report, o, data);
  render_outputs(report, out_dir(o));
  print_summaries(report, out);
  for (const auto& r : report.epsilon_sweep) {
    out << "fgsm eps " << r.epsilon << ": success " << percent(r.success_rate()) << ", mean adversarial KL "
        << r.kl_adversarial_mean << '\n';
  }
  return kOk;
}

int cmd_trace(const Options& o, std::ostream& out) {
  const AttackConfig attack = make_attack(o.attack, o);
  if (attack.method != AttackMethod::PGD) throw UsageError("trace needs a PGD attack");
  const LoadedData data = load_data(o);
  if (o.n == 0 || o.n > data.dataset.size()) {
    throw UsageError("-n must be between 1 and the dataset size " + std::to_string(data.dataset.size()));
  }
  const nn::Model model = load_model(o, data.dataset);
  const ExperimentSpec spec = make_spec(o, {attack});

  ExperimentReport report;
  if (std::isnan(o.threshold)) {
    report = run_calibrated_trace(model, data.dataset, spec, o.trace_count);
  } else {
    const LabeledDataset sample = sample_subset(data.dataset, o.n, o.seed);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < sample.size() && ids.size() < o.trace_count; ++i) {
      if (model.predict(sample.images[i]) == sample.labels[i]) ids.push_back(sample.ids[i]);
    }
    if (ids.empty()) throw std::runtime_error("no correctly classified images to trace");
    report = run_iteration_trace(model, data.dataset, spec, ids, o.threshold, "--threshold");
  }
  add_settings(report, o, data);
  render_outputs(report, out_dir(o));
  const auto& s = *report.trace_summary;
  out << "threshold " << s.threshold << " (" << s.threshold_source << ")\n";
  out << s.early_warnings << " of " << s.images
      << " traced images crossed the threshold before their first misclassification (" << s.misclassified
      << " misclassified within " << s.attack.max_iters << " iterations)\n";
  return kOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  ExperimentReport report;
  if (!o.from_scores.empty()) {
    report.records = read_scores_csv(o.from_scores);
    report.attacks = summaries_from_records(report.records, Statistic::Both);
    report.settings.emplace_back("from_scores", o.from_scores);
  } else {
    if (o.checkpoint.empty()) throw UsageError("compare needs --checkpoint or --from-scores");
    const auto attacks = make_attacks(o);
    const LoadedData data = load_data(o);
    if (o.n == 0 || o.n > data.dataset.size()) {
      throw UsageError("-n must be between 1 and the dataset size " + std::to_string(data.dataset.size()));
    }
    const nn::Model model = load_model(o, data.dataset);
    ExperimentSpec spec = make_spec(o, attacks);
    spec.statistic = Statistic::Both;
    report = run_separation_experiment(model, data.dataset, spec);
    add_settings(report, o, data);
  }
  const auto rows = compare_statistics(report);
  render_outputs(report, out_dir(o));
  out << "attack          statistic  separation  reference\n";
  for (const auto& r : rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%-15s %-10s %-11s %s\n",
                  (r.attack.label + "@" + csv::number(r.attack.epsilon)).c_str(), to_string(r.statistic).c_str(),
                  percent(r.best_percentage).c_str(), r.reference ? percent(*r.reference).c_str() : "-");
    out << line;
  }
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const LabeledDataset corpus = synth_benford_corpus(o.n, {o.height, o.width, o.channels}, o.seed, o.decades);
  const auto dir = out_dir(o);
  const auto img_dir = dir / "synth";
  std::filesystem::create_directories(img_dir);
  DetectorOptions det;
  det.transform_depth = o.transform_depth;
  std::vector<ScoreRecord> records(corpus.size());
  parallel_for(corpus.size(), o.jobs, [&](std::size_t i) {
    encode_png(corpus.images[i], img_dir / (corpus.ids[i] + ".png"));
    records[i] = score_image(corpus.images[i], corpus.ids[i], det);
  });
  write_scores_csv(records, dir / "scores.csv");
  write_settings(dir / "settings.txt", {{"n", std::to_string(o.n)},
                                        {"height", std::to_string(o.height)},
                                        {"width", std::to_string(o.width)},
                                        {"channels", std::to_string(o.channels)},
                                        {"decades", csv::number(o.decades)},
                                        {"seed", std::to_string(o.seed)},
                                        {"transform_depth", std::to_string(o.transform_depth)}});
  std::vector<double> ks;
  for (const auto& r : records) {
    if (!r.degenerate) ks.push_back(r.ks);
  }
  out << "wrote " << corpus.size() << " images to " << img_dir.string();
  if (!ks.empty()) out << "; mean KS of the unquantised corpus " << stats::mean(ks);
  out << '\n';
  return kOk;
}

/// Routes spdlog to `err` for the duration of one run.
class LogScope {
 public:
  LogScope(std::ostream& err, bool verbose) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("benford-cli", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(verbose ? spdlog::level::info : spdlog::level::warn);
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

CLI::App* selected(CLI::App& app) {
  const auto subs = app.get_subcommands();
  return subs.empty() ? &app : subs.front();
}

}  // namespace

const std::vector<std::string>& subcommands() { return kSubcommands; }

std::vector<std::string> flag_names(const std::string& subcommand) {
  OptionSet set;
  auto app = build_app(set);
  std::vector<std::string> names;
  for (const CLI::Option* opt : app->get_subcommand(subcommand)->get_options()) {
    for (const auto& l : opt->get_lnames()) names.push_back("--" + l);
  }
  return names;
}

std::string help_text(const std::string& subcommand) {
  OptionSet set;
  auto app = build_app(set);
  return app->get_subcommand(subcommand)->help();
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  OptionSet set;
  auto app = build_app(set);
  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app->help();
    return kUsageError;
  }

  std::vector<char*> argv;
  std::string program = "benford";
  argv.push_back(program.data());
  for (auto& a : args) argv.push_back(a.data());
  try {
    app->parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << selected(*app)->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app->help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << selected(*app)->help();
    return kUsageError;
  }

  CLI::App* sub = selected(*app);
  const std::string name = sub->get_name();
  const Options& o = set[name];
  LogScope logs(err, o.verbose);
  try {
    if (name == "train") return cmd_train(o, out);
    if (name == "attack") return cmd_attack(o, out);
    if (name == "score") return cmd_score(o, out);
    if (name == "sweep") return cmd_sweep(o, out);
    if (name == "trace") return cmd_trace(o, out);
    if (name == "compare") return cmd_compare(o, out);
    if (name == "synth") return cmd_synth(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  err << "error: unknown subcommand " << name << '\n';
  return kUsageError;
}

}  // namespace benford::cli
