#include "benford/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace benford {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void require_unit(const ImageTensor& image, const char* what) {
  if (image.scale() != Scale::Unit) {
    throw std::invalid_argument(std::string(what) + ": attacks operate on unit-scale images");
  }
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

AttackStep make_step(const nn::Model& model, std::size_t iteration, ImageTensor image,
                     std::size_t label) {
  AttackStep step;
  step.iteration = iteration;
  const auto logits = model.logits(image);
  step.predicted = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  const double peak = logits[step.predicted];
  double total = 0.0;
  for (double z : logits) total += std::exp(z - peak);
  step.loss = std::max(0.0, peak + std::log(total) - logits[label]);
  step.image = std::move(image);
  return step;
}

}  // namespace

std::string to_string(AttackMethod method) { return method == AttackMethod::FGSM ? "fgsm" : "pgd"; }

std::string to_string(Norm norm) { return norm == Norm::Linf ? "linf" : "l2"; }

AttackConfig AttackConfig::fgsm(double epsilon) {
  AttackConfig c;
  c.method = AttackMethod::FGSM;
  c.norm = Norm::Linf;
  c.epsilon = epsilon;
  c.step_size = epsilon;
  c.max_iters = 1;
  c.random_start = false;
  return c;
}

AttackConfig AttackConfig::pgd(Norm norm, double epsilon) {
  AttackConfig c;
  c.method = AttackMethod::PGD;
  c.norm = norm;
  c.epsilon = epsilon;
  c.step_size = epsilon / 10.0;
  c.max_iters = 40;
  c.random_start = true;
  return c;
}

std::string AttackConfig::label() const {
  return method == AttackMethod::FGSM ? "fgsm" : "pgd-" + to_string(norm);
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("AttackConfig: epsilon must be finite and non-negative");
  }
  if (method == AttackMethod::PGD) {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) {
      throw std::invalid_argument("AttackConfig: PGD step size must be positive");
    }
    if (max_iters == 0) {
      throw std::invalid_argument("AttackConfig: PGD needs at least one iteration");
    }
  }
}

ImageTensor project_ball(const ImageTensor& point, const ImageTensor& center, double epsilon,
                         Norm norm) {
  if (!point.same_shape(center)) {
    throw std::invalid_argument("project_ball: shape mismatch");
  }
  if (epsilon < 0.0) {
    throw std::invalid_argument("project_ball: negative epsilon");
  }
  auto p = point.data();
  auto c = center.data();
  std::vector<double> out(p.begin(), p.end());
  if (norm == Norm::Linf) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::clamp(p[i], c[i] - epsilon, c[i] + epsilon);
    }
  } else {
    std::vector<double> diff(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) diff[i] = p[i] - c[i];
    const double length = l2_norm(diff);
    if (length > epsilon) {
      const double factor = epsilon / length;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = c[i] + factor * diff[i];
    }
  }
  // The projected point may leave the source range; callers clip afterwards.
  return ImageTensor(point.height(), point.width(), point.channels(), std::move(out), Scale::Derived);
}

double distance(const ImageTensor& a, const ImageTensor& b, Norm norm) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("distance: shape mismatch");
  }
  auto x = a.data();
  auto y = b.data();
  if (norm == Norm::Linf) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::fabs(x[i] - y[i]));
    return worst;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(sum);
}

AttackOutcome fgsm(const nn::Model& model, const ImageTensor& image, std::size_t label, double epsilon) {
  require_unit(image, "fgsm");
  AttackConfig config = AttackConfig::fgsm(epsilon);
  config.validate();
  const ImageTensor gradient = model.grad_input(image, label);
  auto x = image.data();
  auto g = gradient.data();
  std::vector<double> adv(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) adv[i] = clip01(x[i] + epsilon * sign(g[i]));

  AttackOutcome outcome;
  outcome.config = config;
  outcome.trace.push_back(make_step(
      model, 1, ImageTensor(image.height(), image.width(), image.channels(), std::move(adv), Scale::Unit),
      label));
  outcome.final_image = outcome.trace.back().image;
  outcome.success = outcome.trace.back().predicted != label;
  outcome.iterations_used = 1;
  return outcome;
}

AttackOutcome pgd(const nn::Model& model, const ImageTensor& image, std::size_t label,
                  const AttackConfig& config) {
  require_unit(image, "pgd");
  if (config.method != AttackMethod::PGD) {
    throw std::invalid_argument("pgd: config.method must be PGD");
  }
  config.validate();
  const auto x0 = image.data();
  const std::size_t n = x0.size();
  std::vector<double> current(x0.begin(), x0.end());

  if (config.random_start && config.epsilon > 0.0) {
    std::mt19937_64 rng(config.rng_seed);
    if (config.norm == Norm::Linf) {
      std::uniform_real_distribution<double> offset(-config.epsilon, config.epsilon);
      for (std::size_t i = 0; i < n; ++i) current[i] = clip01(x0[i] + offset(rng));
    } else {
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<double> direction(n);
      for (double& d : direction) d = gauss(rng);
      const double length = l2_norm(direction);
      const double radius = config.epsilon * std::pow(unit(rng), 1.0 / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i) {
        current[i] = clip01(x0[i] + (length > 0.0 ? radius * direction[i] / length : 0.0));
      }
    }
  }

  AttackOutcome outcome;
  outcome.config = config;
  ImageTensor iterate(image.height(), image.width(), image.channels(), current, Scale::Unit);
  std::vector<double> step(n);

  for (std::size_t t = 1; t <= config.max_iters; ++t) {
    const ImageTensor gradient = model.grad_input(iterate, label);
    auto g = gradient.data();
    auto xt = iterate.data();
    bool moved = true;
    if (config.norm == Norm::Linf) {
      for (std::size_t i = 0; i < n; ++i) {
        const double ascended = xt[i] + config.step_size * sign(g[i]);
        step[i] = clip01(std::clamp(ascended, x0[i] - config.epsilon, x0[i] + config.epsilon));
      }
    } else {
      const double length = l2_norm(g);
      if (length > 0.0) {
        for (std::size_t i = 0; i < n; ++i) step[i] = xt[i] + config.step_size * g[i] / length;
        double dist = 0.0;
        for (std::size_t i = 0; i < n; ++i) dist += (step[i] - x0[i]) * (step[i] - x0[i]);
        dist = std::sqrt(dist);
        if (dist > config.epsilon) {
          const double factor = config.epsilon / dist;
          for (std::size_t i = 0; i < n; ++i) step[i] = x0[i] + factor * (step[i] - x0[i]);
        }
        for (double& v : step) v = clip01(v);
      } else {
        moved = false;  // stationary point: nothing to ascend
      }
    }
    if (moved) {
      iterate = ImageTensor(image.height(), image.width(), image.channels(), step, Scale::Unit);
    }
    outcome.trace.push_back(make_step(model, t, iterate, label));
    outcome.iterations_used = t;
    if (config.early_stop && outcome.trace.back().predicted != label) {
      break;
    }
  }
  outcome.final_image = iterate;
  outcome.success = outcome.trace.back().predicted != label;
  return outcome;
}

AttackOutcome run_attack(const nn::Model& model, const ImageTensor& image, std::size_t label,
                         const AttackConfig& config) {
  if (config.method == AttackMethod::FGSM) {
    AttackOutcome outcome = fgsm(model, image, label, config.epsilon);
    outcome.config = config;
    return outcome;
  }
  return pgd(model, image, label, config);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view image_id) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char ch : image_id) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 0x100000001B3ULL;
  }
  return splitmix64(base ^ splitmix64(h));
}

}  // namespace benford
