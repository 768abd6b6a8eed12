#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "benford/image.hpp"
#include "benford/tinynet.hpp"

namespace benford::nn {

struct Adam {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Heavy-ball momentum: v <- momentum * v + g; theta <- theta - lr * v.
struct SgdMomentum {
  double learning_rate = 1e-3;
  double momentum = 0.9;
};

using Optimizer = std::variant<Adam, SgdMomentum>;

struct TrainConfig {
  Optimizer optimizer = Adam{};
  std::size_t epochs = 6;
  std::size_t batch_size = 32;
  std::uint64_t rng_seed = 0;
  /// Worker threads for per-batch gradients. Results do not depend on it.
  std::size_t jobs = 1;

  /// Throws std::invalid_argument on out-of-range hyperparameters.
  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  /// Mean loss and accuracy over the epoch's mini-batches, measured before
  /// each batch's update.
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  /// Filled when a held-out set is supplied; otherwise negative.
  double held_out_accuracy = -1.0;
};

struct LabeledView {
  std::span<const ImageTensor> images;
  std::span<const std::size_t> labels;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> log;
};

/// Mini-batch training on mean cross-entropy. Each epoch visits the data in a
/// fresh permutation drawn from rng_seed; the model is not re-initialised.
/// Batch gradients are summed over fixed 8-sample chunks in chunk order, so
/// the trajectory is bit-identical for any `jobs`.
TrainResult train(Model model, LabeledView data, const TrainConfig& config,
                  LabeledView held_out = {});

/// Mean cross-entropy over a labelled set.
double mean_loss(const Model& model, LabeledView data, std::size_t jobs = 1);

double accuracy(const Model& model, LabeledView data, std::size_t jobs = 1);

}  // namespace benford::nn
