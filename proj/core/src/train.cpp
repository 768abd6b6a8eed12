#include "benford/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "benford/parallel.hpp"

namespace benford::nn {

namespace {

constexpr std::size_t kChunk = 8;

void check_view(const LabeledView& data, const char* what) {
  if (data.images.size() != data.labels.size()) {
    throw std::invalid_argument(std::string(what) + ": image and label counts differ");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  std::visit(
      [](const auto& opt) {
        using T = std::decay_t<decltype(opt)>;
        if (!(opt.learning_rate >= 0.0) || !std::isfinite(opt.learning_rate)) {
          throw std::invalid_argument("TrainConfig: learning rate must be finite and non-negative");
        }
        if constexpr (std::is_same_v<T, Adam>) {
          if (opt.beta1 < 0.0 || opt.beta1 >= 1.0 || opt.beta2 < 0.0 || opt.beta2 >= 1.0) {
            throw std::invalid_argument("TrainConfig: Adam betas must lie in [0, 1)");
          }
          if (!(opt.epsilon > 0.0)) throw std::invalid_argument("TrainConfig: Adam epsilon must be positive");
        } else {
          if (opt.momentum < 0.0 || opt.momentum >= 1.0) {
            throw std::invalid_argument("TrainConfig: momentum must lie in [0, 1)");
          }
        }
      },
      optimizer);
}

TrainResult train(Model model, LabeledView data, const TrainConfig& config, LabeledView held_out) {
  config.validate();
  check_view(data, "train");
  check_view(held_out, "train (held-out)");
  if (data.images.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  for (std::size_t label : data.labels) {
    if (label >= model.num_classes()) {
      throw std::invalid_argument("train: label " + std::to_string(label) + " out of range");
    }
  }

  const std::size_t n_params = model.parameter_count();
  std::vector<double> grad(n_params);
  std::vector<double> first_moment(n_params, 0.0);
  std::vector<double> second_moment(n_params, 0.0);
  std::vector<std::size_t> order(data.images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.rng_seed);
  std::size_t step = 0;

  TrainResult result{std::move(model), {}};
  Model& net = result.model;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::size_t batch = stop - start;
      const std::size_t chunks = (batch + kChunk - 1) / kChunk;
      std::vector<std::vector<double>> chunk_grad(chunks);
      std::vector<double> chunk_loss(chunks, 0.0);
      std::vector<std::size_t> chunk_correct(chunks, 0);

      parallel_for(chunks, config.jobs, [&](std::size_t c) {
        auto& g = chunk_grad[c];
        g.assign(n_params, 0.0);
        const std::size_t lo = start + c * kChunk;
        const std::size_t hi = std::min(stop, lo + kChunk);
        for (std::size_t s = lo; s < hi; ++s) {
          const std::size_t idx = order[s];
          const auto pass = net.backward(data.images[idx], data.labels[idx], g, false);
          chunk_loss[c] += pass.loss;
          const auto top = std::max_element(pass.probabilities.begin(), pass.probabilities.end());
          if (static_cast<std::size_t>(top - pass.probabilities.begin()) == data.labels[idx]) {
            ++chunk_correct[c];
          }
        }
      });

      std::ranges::fill(grad, 0.0);
      for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += chunk_grad[c][i];
        loss_sum += chunk_loss[c];
        correct += chunk_correct[c];
      }
      const double scale = 1.0 / static_cast<double>(batch);
      for (double& g : grad) g *= scale;

      ++step;
      auto params = net.parameters();
      std::visit(
          [&](const auto& opt) {
            using T = std::decay_t<decltype(opt)>;
            if constexpr (std::is_same_v<T, Adam>) {
              const double t = static_cast<double>(step);
              const double correction1 = 1.0 - std::pow(opt.beta1, t);
              const double correction2 = 1.0 - std::pow(opt.beta2, t);
              for (std::size_t i = 0; i < n_params; ++i) {
                first_moment[i] = opt.beta1 * first_moment[i] + (1.0 - opt.beta1) * grad[i];
                second_moment[i] = opt.beta2 * second_moment[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
                const double m_hat = first_moment[i] / correction1;
                const double v_hat = second_moment[i] / correction2;
                params[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
              }
            } else {
              for (std::size_t i = 0; i < n_params; ++i) {
                first_moment[i] = opt.momentum * first_moment[i] + grad[i];
                params[i] -= opt.learning_rate * first_moment[i];
              }
            }
          },
          config.optimizer);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = loss_sum / static_cast<double>(order.size());
    metrics.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!held_out.images.empty()) {
      metrics.held_out_accuracy = accuracy(net, held_out, config.jobs);
    }
    result.log.push_back(metrics);
  }
  return result;
}

double mean_loss(const Model& model, LabeledView data, std::size_t jobs) {
  check_view(data, "mean_loss");
  if (data.images.empty()) return 0.0;
  std::vector<double> losses(data.images.size());
  parallel_for(losses.size(), jobs,
               [&](std::size_t i) { losses[i] = model.loss(data.images[i], data.labels[i]); });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

double accuracy(const Model& model, LabeledView data, std::size_t jobs) {
  check_view(data, "accuracy");
  if (data.images.empty()) return 0.0;
  std::vector<char> hit(data.images.size(), 0);
  parallel_for(hit.size(), jobs,
               [&](std::size_t i) { hit[i] = model.predict(data.images[i]) == data.labels[i]; });
  const auto correct = std::count(hit.begin(), hit.end(), 1);
  return static_cast<double>(correct) / static_cast<double>(hit.size());
}

}  // namespace benford::nn
