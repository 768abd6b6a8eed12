#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "benford/attacks.hpp"
#include "benford/digits.hpp"
#include "benford/image.hpp"

namespace benford {

enum class Condition { Clean, Adversarial };

std::string to_string(Condition condition);

struct DetectorOptions {
  /// Number of times the gradient-magnitude transform is applied.
  std::size_t transform_depth = 1;
};

/// Per-image detection result.
///
/// A degenerate record comes from an image whose transform has no non-zero
/// value (a constant image, for instance); it has no usable digit distribution,
/// ks and kl are NaN, and it must not enter any threshold sweep.
struct ScoreRecord {
  std::string image_id;
  Condition condition = Condition::Clean;
  std::optional<AttackConfig> attack;
  /// For adversarial records: did the attack change the prediction.
  bool attack_success = false;
  bool degenerate = false;
  double ks = 0.0;
  double kl = 0.0;
  std::array<double, 9> digit_probs{};
  std::size_t support_count = 0;
};

/// Pooled leading-digit histogram of the transformed image. Unit images are
/// scaled to 0-255 first; each channel is transformed separately and all
/// channels feed one histogram.
DigitDistribution transformed_digits(const ImageTensor& image, const DetectorOptions& options = {});

/// Transform, digit histogram, then KS and KL against Benford.
ScoreRecord score_image(const ImageTensor& image, std::string image_id = {},
                        const DetectorOptions& options = {});

struct SeparationPoint {
  double threshold = 0.0;
  double percentage = 0.0;
};

struct SeparationResult {
  double best_threshold = 0.0;
  double best_percentage = 0.0;
  /// Strictly increasing thresholds.
  std::vector<SeparationPoint> curve;
};

/// Fraction of the pooled set labelled correctly by "adversarial iff score > t".
double separation_percentage(std::span<const double> clean, std::span<const double> adversarial,
                             double threshold);

/// Sweeps t over the midpoints between adjacent distinct scores plus one point
/// below the minimum and one at the maximum. Ties on the best percentage go to
/// the smallest threshold. Throws std::invalid_argument on an empty list.
SeparationResult separation_sweep(std::span<const double> clean, std::span<const double> adversarial);

}  // namespace benford
