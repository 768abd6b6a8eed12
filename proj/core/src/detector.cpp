#include "benford/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "benford/imaging.hpp"

namespace benford {

std::string to_string(Condition condition) {
  return condition == Condition::Clean ? "clean" : "adversarial";
}

DigitDistribution transformed_digits(const ImageTensor& image, const DetectorOptions& options) {
  if (image.empty()) {
    throw std::invalid_argument("score_image: empty image");
  }
  if (options.transform_depth == 0) {
    throw std::invalid_argument("score_image: transform_depth must be at least 1");
  }
  ImageTensor transformed = image.to_eight_bit();
  for (std::size_t k = 0; k < options.transform_depth; ++k) {
    transformed = gradient_magnitude(transformed);
  }
  return digit_histogram(transformed.data());
}

ScoreRecord score_image(const ImageTensor& image, std::string image_id, const DetectorOptions& options) {
  const DigitDistribution digits = transformed_digits(image, options);
  ScoreRecord record;
  record.image_id = std::move(image_id);
  record.support_count = digits.support_count;
  if (digits.empty()) {
    record.degenerate = true;
    record.ks = std::numeric_limits<double>::quiet_NaN();
    record.kl = std::numeric_limits<double>::quiet_NaN();
    return record;
  }
  record.digit_probs = digits.probs;
  const DivergenceReport divergence = compare_to_benford(digits);
  record.ks = divergence.ks;
  record.kl = divergence.kl;
  return record;
}

double separation_percentage(std::span<const double> clean, std::span<const double> adversarial,
                             double threshold) {
  const auto flagged = std::count_if(adversarial.begin(), adversarial.end(),
                                     [&](double s) { return s > threshold; });
  const auto passed = std::count_if(clean.begin(), clean.end(), [&](double s) { return s <= threshold; });
  return static_cast<double>(flagged + passed) / static_cast<double>(clean.size() + adversarial.size());
}

SeparationResult separation_sweep(std::span<const double> clean, std::span<const double> adversarial) {
  if (clean.empty() || adversarial.empty()) {
    throw std::invalid_argument("separation_sweep: both score lists must be non-empty");
  }
  struct Scored {
    double score;
    bool adversarial;
  };
  std::vector<Scored> all;
  all.reserve(clean.size() + adversarial.size());
  for (double s : clean) all.push_back({s, false});
  for (double s : adversarial) all.push_back({s, true});
  for (const auto& s : all) {
    if (!std::isfinite(s.score)) {
      throw std::invalid_argument("separation_sweep: non-finite score");
    }
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

  const double total = static_cast<double>(all.size());
  const double n_adv = static_cast<double>(adversarial.size());
  const double lowest = all.front().score;
  const double highest = all.back().score;

  SeparationResult result;
  // Below every score: everything is flagged adversarial.
  const double margin = std::max(1e-3, 0.01 * (highest - lowest));
  result.curve.push_back({lowest - margin, n_adv / total});

  double clean_at_or_below = 0.0;
  double adv_at_or_below = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    const double value = all[i].score;
    for (; i < all.size() && all[i].score == value; ++i) {
      (all[i].adversarial ? adv_at_or_below : clean_at_or_below) += 1.0;
    }
    const double percentage = ((n_adv - adv_at_or_below) + clean_at_or_below) / total;
    double threshold = value;
    if (i < all.size()) {
      const double next = all[i].score;
      threshold = value + (next - value) / 2.0;
      if (threshold >= next) threshold = value;  // adjacent doubles
    }
    result.curve.push_back({threshold, percentage});
  }

  result.best_threshold = result.curve.front().threshold;
  result.best_percentage = result.curve.front().percentage;
  for (const auto& point : result.curve) {
    if (point.percentage > result.best_percentage) {
      result.best_percentage = point.percentage;
      result.best_threshold = point.threshold;
    }
  }
  return result;
}

}  // namespace benford
