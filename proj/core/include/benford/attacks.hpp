#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "benford/image.hpp"
#include "benford/tinynet.hpp"

namespace benford {

enum class AttackMethod { FGSM, PGD };
enum class Norm { Linf, L2 };

std::string to_string(AttackMethod method);
std::string to_string(Norm norm);

/// Untargeted white-box attack settings. Epsilon and step size are on the unit
/// pixel scale.
struct AttackConfig {
  AttackMethod method = AttackMethod::PGD;
  Norm norm = Norm::Linf;
  double epsilon = 0.2;
  double step_size = 0.02;
  std::size_t max_iters = 40;
  bool random_start = true;
  /// Stop at the first misclassified iterate; disable for full traces.
  bool early_stop = true;
  std::uint64_t rng_seed = 0;

  /// FGSM with the given budget (norm is always Linf).
  static AttackConfig fgsm(double epsilon);
  /// PGD with step epsilon / 10, 40 iterations, random start.
  static AttackConfig pgd(Norm norm, double epsilon);

  /// Short label such as "fgsm", "pgd-linf" or "pgd-l2".
  std::string label() const;

  /// Throws std::invalid_argument for negative epsilon, non-positive PGD step,
  /// or zero iterations. A step larger than epsilon is allowed.
  void validate() const;

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

struct AttackStep {
  std::size_t iteration = 0;  ///< 1-based
  ImageTensor image;
  std::size_t predicted = 0;
  double loss = 0.0;
};

struct AttackOutcome {
  ImageTensor final_image;
  /// The model's argmax on final_image differs from the true label.
  bool success = false;
  std::size_t iterations_used = 0;
  /// One entry per iteration taken (exactly one for FGSM).
  std::vector<AttackStep> trace;
  AttackConfig config;
};

/// Clamp to [center - eps, center + eps] (Linf) or radial shrink onto the
/// sphere of radius eps (L2). Points already inside are returned unchanged.
ImageTensor project_ball(const ImageTensor& point, const ImageTensor& center, double epsilon, Norm norm);

double distance(const ImageTensor& a, const ImageTensor& b, Norm norm);

/// x* = clip01(x + eps * sign(grad_x J)), with sign(0) = 0.
AttackOutcome fgsm(const nn::Model& model, const ImageTensor& image, std::size_t label, double epsilon);

/// Projected gradient ascent on the loss:
///   Linf: x <- clip01(P_inf(x + step * sign(g)))
///   L2:   x <- clip01(P_2(x + step * g / |g|_2)), skipping the step when g = 0
/// Optional uniform random start inside the ball. Stops at the first
/// misclassification when config.early_stop, else runs max_iters iterations.
AttackOutcome pgd(const nn::Model& model, const ImageTensor& image, std::size_t label,
                  const AttackConfig& config);

/// Dispatches on config.method.
AttackOutcome run_attack(const nn::Model& model, const ImageTensor& image, std::size_t label,
                         const AttackConfig& config);

/// Stable per-image seed derived from a base seed and an image identifier.
std::uint64_t derive_seed(std::uint64_t base, std::string_view image_id);

}  // namespace benford
