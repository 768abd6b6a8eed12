#include "benford/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace benford::nn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string shape_string(const Shape& s) {
  return "(" + std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels) + ")";
}

// Planar (channel-major) 3x3 "same" cross-correlation.
void conv_forward(const double* in, const Shape& shape, std::size_t out_channels,
                  const double* weights, const double* bias, double* out) {
  const auto h = static_cast<std::ptrdiff_t>(shape.height);
  const auto w = static_cast<std::ptrdiff_t>(shape.width);
  const std::size_t plane = shape.height * shape.width;
  for (std::size_t oc = 0; oc < out_channels; ++oc) {
    double* dst_plane = out + oc * plane;
    std::fill(dst_plane, dst_plane + plane, bias[oc]);
    for (std::size_t ic = 0; ic < shape.channels; ++ic) {
      const double* src_plane = in + ic * plane;
      const double* k = weights + (oc * shape.channels + ic) * 9;
      for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
        for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
          const double wt = k[ky * 3 + kx];
          const std::ptrdiff_t di = ky - 1;
          const std::ptrdiff_t dj = kx - 1;
          const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di);
          const std::ptrdiff_t i1 = std::min(h, h - di);
          const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dj);
          const std::ptrdiff_t j1 = std::min(w, w - dj);
          for (std::ptrdiff_t i = i0; i < i1; ++i) {
            double* dst = dst_plane + i * w;
            const double* src = src_plane + (i + di) * w + dj;
            for (std::ptrdiff_t j = j0; j < j1; ++j) {
              dst[j] += wt * src[j];
            }
          }
        }
      }
    }
  }
}

void conv_backward(const double* in, const Shape& shape, std::size_t out_channels,
                   const double* weights, const double* dout, double* dweights, double* dbias,
                   double* din) {
  const auto h = static_cast<std::ptrdiff_t>(shape.height);
  const auto w = static_cast<std::ptrdiff_t>(shape.width);
  const std::size_t plane = shape.height * shape.width;
  for (std::size_t oc = 0; oc < out_channels; ++oc) {
    const double* g_plane = dout + oc * plane;
    if (dbias != nullptr) {
      double sum = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        sum += g_plane[p];
      }
      dbias[oc] += sum;
    }
    for (std::size_t ic = 0; ic < shape.channels; ++ic) {
      const double* src_plane = in + ic * plane;
      double* din_plane = din != nullptr ? din + ic * plane : nullptr;
      const std::size_t k_base = (oc * shape.channels + ic) * 9;
      for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
        for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
          const double wt = weights[k_base + static_cast<std::size_t>(ky * 3 + kx)];
          const std::ptrdiff_t di = ky - 1;
          const std::ptrdiff_t dj = kx - 1;
          const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di);
          const std::ptrdiff_t i1 = std::min(h, h - di);
          const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dj);
          const std::ptrdiff_t j1 = std::min(w, w - dj);
          double gw = 0.0;
          for (std::ptrdiff_t i = i0; i < i1; ++i) {
            const double* g = g_plane + i * w;
            const double* src = src_plane + (i + di) * w + dj;
            for (std::ptrdiff_t j = j0; j < j1; ++j) {
              gw += g[j] * src[j];
            }
            if (din_plane != nullptr) {
              double* dst = din_plane + (i + di) * w + dj;
              for (std::ptrdiff_t j = j0; j < j1; ++j) {
                dst[j] += wt * g[j];
              }
            }
          }
          if (dweights != nullptr) {
            dweights[k_base + static_cast<std::size_t>(ky * 3 + kx)] += gw;
          }
        }
      }
    }
  }
}

}  // namespace

std::string layer_name(const Layer& layer) {
  return std::visit(overloaded{
                        [](const Conv2D& c) { return "Conv2D(" + std::to_string(c.out_channels) + ")"; },
                        [](const ReLU&) { return std::string("ReLU"); },
                        [](const MaxPool2&) { return std::string("MaxPool2"); },
                        [](const Flatten&) { return std::string("Flatten"); },
                        [](const Dense& d) { return "Dense(" + std::to_string(d.out_dim) + ")"; },
                        [](const Softmax&) { return std::string("Softmax"); },
                    },
                    layer);
}

struct Model::Trace {
  std::vector<std::vector<double>> acts;  // acts[k] feeds layer k
  std::vector<std::vector<std::size_t>> argmax;
};

Model::Model(Shape input, std::vector<Layer> layers) : input_(input), layers_(std::move(layers)) {
  if (input_.size() == 0) {
    throw std::invalid_argument("Model: input shape must be non-empty");
  }
  if (layers_.empty() || !std::holds_alternative<Softmax>(layers_.back())) {
    throw std::invalid_argument("Model: the last layer must be Softmax");
  }
  shapes_.push_back(input_);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Shape in = shapes_.back();
    std::size_t weight_count = 0;
    std::size_t bias_count = 0;
    const auto fail = [&](const std::string& why) {
      throw std::invalid_argument("Model: layer " + std::to_string(k) + " " +
                                  layer_name(layers_[k]) + " cannot take input " + shape_string(in) +
                                  ": " + why);
    };
    const bool flat = in.height == 1 && in.width == 1;
    const Shape out = std::visit(
        overloaded{
            [&](const Conv2D& c) {
              if (c.out_channels == 0) fail("zero output channels");
              weight_count = c.out_channels * in.channels * 9;
              bias_count = c.out_channels;
              return Shape{in.height, in.width, c.out_channels};
            },
            [&](const ReLU&) { return in; },
            [&](const MaxPool2&) {
              if (in.height < 2 || in.width < 2) fail("needs at least 2x2 spatial extent");
              return Shape{in.height / 2, in.width / 2, in.channels};
            },
            [&](const Flatten&) { return Shape{1, 1, in.size()}; },
            [&](const Dense& d) {
              if (!flat) fail("dense layers need a flattened input");
              if (d.out_dim == 0) fail("zero output width");
              weight_count = d.out_dim * in.channels;
              bias_count = d.out_dim;
              return Shape{1, 1, d.out_dim};
            },
            [&](const Softmax&) {
              if (!flat) fail("softmax needs a flattened input");
              if (k + 1 != layers_.size()) fail("softmax must be the last layer");
              return in;
            },
        },
        layers_[k]);
    param_offset_.push_back(offset);
    weight_count_.push_back(weight_count);
    bias_count_.push_back(bias_count);
    offset += weight_count + bias_count;
    shapes_.push_back(out);
  }
  params_.assign(offset, 0.0);
}

Model Model::desk_cnn(Shape input, std::size_t classes) {
  return Model(input, {Conv2D{16}, ReLU{}, MaxPool2{}, Conv2D{32}, ReLU{}, MaxPool2{}, Flatten{},
                       Dense{128}, ReLU{}, Dense{classes}, Softmax{}});
}

void Model::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (weight_count_[k] == 0) {
      continue;
    }
    const std::size_t fan_in = std::holds_alternative<Conv2D>(layers_[k]) ? shapes_[k].channels * 9
                                                                           : shapes_[k].size();
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : weights(k)) {
      w = dist(rng);
    }
    std::ranges::fill(bias(k), 0.0);
  }
}

std::span<double> Model::weights(std::size_t layer) {
  return std::span<double>(params_).subspan(param_offset_.at(layer), weight_count_.at(layer));
}

std::span<double> Model::bias(std::size_t layer) {
  return std::span<double>(params_).subspan(param_offset_.at(layer) + weight_count_.at(layer),
                                            bias_count_.at(layer));
}

void Model::check_input(const ImageTensor& image) const {
  if (image.height() != input_.height || image.width() != input_.width ||
      image.channels() != input_.channels) {
    throw std::invalid_argument("Model: image shape (" + std::to_string(image.height()) + "x" +
                                std::to_string(image.width()) + "x" +
                                std::to_string(image.channels()) + ") does not match input " +
                                shape_string(input_));
  }
}

void Model::check_label(std::size_t label) const {
  if (label >= num_classes()) {
    throw std::invalid_argument("Model: label " + std::to_string(label) + " out of range for " +
                                std::to_string(num_classes()) + " classes");
  }
}

std::vector<double> Model::to_planar(const ImageTensor& image) const {
  const std::size_t channels = image.channels();
  const std::size_t plane = image.height() * image.width();
  auto src = image.data();
  if (channels == 1) {
    return {src.begin(), src.end()};
  }
  std::vector<double> out(src.size());
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      out[c * plane + p] = src[p * channels + c];
    }
  }
  return out;
}

void Model::run_forward(const ImageTensor& image, Trace& trace) const {
  check_input(image);
  const std::size_t depth = layers_.size();
  trace.acts.resize(depth + 1);
  trace.argmax.resize(depth);
  trace.acts[0] = to_planar(image);
  for (std::size_t k = 0; k < depth; ++k) {
    const Shape& in_shape = shapes_[k];
    const Shape& out_shape = shapes_[k + 1];
    const std::vector<double>& in = trace.acts[k];
    std::vector<double>& out = trace.acts[k + 1];
    out.assign(out_shape.size(), 0.0);
    const double* w = params_.data() + param_offset_[k];
    const double* b = w + weight_count_[k];
    std::visit(overloaded{
                   [&](const Conv2D& c) {
                     conv_forward(in.data(), in_shape, c.out_channels, w, b, out.data());
                   },
                   [&](const ReLU&) {
                     for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
                   },
                   [&](const MaxPool2&) {
                     auto& idx = trace.argmax[k];
                     idx.assign(out.size(), 0);
                     const std::size_t ow = out_shape.width;
                     const std::size_t iw = in_shape.width;
                     for (std::size_t c = 0; c < out_shape.channels; ++c) {
                       const std::size_t in_base = c * in_shape.height * iw;
                       const std::size_t out_base = c * out_shape.height * ow;
                       for (std::size_t i = 0; i < out_shape.height; ++i) {
                         for (std::size_t j = 0; j < ow; ++j) {
                           std::size_t best = in_base + (2 * i) * iw + 2 * j;
                           for (std::size_t di = 0; di < 2; ++di) {
                             for (std::size_t dj = 0; dj < 2; ++dj) {
                               const std::size_t at = in_base + (2 * i + di) * iw + 2 * j + dj;
                               if (in[at] > in[best]) best = at;
                             }
                           }
                           out[out_base + i * ow + j] = in[best];
                           idx[out_base + i * ow + j] = best;
                         }
                       }
                     }
                   },
                   [&](const Flatten&) { out = in; },
                   [&](const Dense& d) {
                     const std::size_t n_in = in.size();
                     for (std::size_t o = 0; o < d.out_dim; ++o) {
                       const double* row = w + o * n_in;
                       double sum = b[o];
                       for (std::size_t i = 0; i < n_in; ++i) sum += row[i] * in[i];
                       out[o] = sum;
                     }
                   },
                   [&](const Softmax&) {
                     const double peak = *std::max_element(in.begin(), in.end());
                     double total = 0.0;
                     for (std::size_t i = 0; i < in.size(); ++i) {
                       out[i] = std::exp(in[i] - peak);
                       total += out[i];
                     }
                     for (double& p : out) p /= total;
                   },
               },
               layers_[k]);
  }
}

std::vector<double> Model::forward(const ImageTensor& image) const {
  Trace trace;
  run_forward(image, trace);
  return std::move(trace.acts.back());
}

std::vector<double> Model::logits(const ImageTensor& image) const {
  Trace trace;
  run_forward(image, trace);
  return std::move(trace.acts[layers_.size() - 1]);
}

std::size_t Model::predict(const ImageTensor& image) const {
  const auto scores = logits(image);
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

double Model::loss(const ImageTensor& image, std::size_t label) const {
  check_label(label);
  const auto z = logits(image);
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  return std::max(0.0, peak + std::log(total) - z[label]);
}

ImageTensor Model::grad_input(const ImageTensor& image, std::size_t label) const {
  auto result = backward(image, label, {}, true);
  return ImageTensor(image.height(), image.width(), image.channels(), std::move(result.input),
                     Scale::Derived);
}

LossGradient Model::backward(const ImageTensor& image, std::size_t label,
                             std::span<double> param_grad, bool want_input) const {
  check_label(label);
  if (!param_grad.empty() && param_grad.size() != params_.size()) {
    throw std::invalid_argument("Model::backward: parameter gradient buffer has wrong size");
  }
  Trace trace;
  run_forward(image, trace);
  const std::size_t depth = layers_.size();

  LossGradient result;
  const std::vector<double>& z = trace.acts[depth - 1];
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  result.loss = std::max(0.0, peak + std::log(total) - z[label]);
  result.probabilities = trace.acts[depth];

  // Softmax + cross-entropy: d loss / d logits = p - onehot(label).
  std::vector<double> grad = result.probabilities;
  grad[label] -= 1.0;

  const bool want_params = !param_grad.empty();
  for (std::size_t k = depth - 1; k-- > 0;) {
    const bool need_din = k > 0 || want_input;
    const Shape& in_shape = shapes_[k];
    const std::vector<double>& in = trace.acts[k];
    std::vector<double> din(need_din ? in.size() : 0, 0.0);
    const double* w = params_.data() + param_offset_[k];
    double* dw = want_params ? param_grad.data() + param_offset_[k] : nullptr;
    double* db = want_params ? dw + weight_count_[k] : nullptr;
    std::visit(overloaded{
                   [&](const Conv2D& c) {
                     conv_backward(in.data(), in_shape, c.out_channels, w, grad.data(), dw, db,
                                   need_din ? din.data() : nullptr);
                   },
                   [&](const ReLU&) {
                     if (!need_din) return;
                     for (std::size_t i = 0; i < in.size(); ++i) din[i] = in[i] > 0.0 ? grad[i] : 0.0;
                   },
                   [&](const MaxPool2&) {
                     if (!need_din) return;
                     const auto& idx = trace.argmax[k];
                     for (std::size_t o = 0; o < grad.size(); ++o) din[idx[o]] += grad[o];
                   },
                   [&](const Flatten&) {
                     if (need_din) din = grad;
                   },
                   [&](const Dense& d) {
                     const std::size_t n_in = in.size();
                     for (std::size_t o = 0; o < d.out_dim; ++o) {
                       const double g = grad[o];
                       if (want_params) {
                         double* row = dw + o * n_in;
                         for (std::size_t i = 0; i < n_in; ++i) row[i] += g * in[i];
                         db[o] += g;
                       }
                       if (need_din) {
                         const double* row = w + o * n_in;
                         for (std::size_t i = 0; i < n_in; ++i) din[i] += row[i] * g;
                       }
                     }
                   },
                   [&](const Softmax&) {
                     throw std::logic_error("Model::backward: softmax before the last layer");
                   },
               },
               layers_[k]);
    grad = std::move(din);
  }

  if (want_input) {
    // Planar back to interleaved (row, col, channel).
    const std::size_t channels = input_.channels;
    if (channels == 1) {
      result.input = std::move(grad);
    } else {
      const std::size_t plane = input_.height * input_.width;
      result.input.assign(grad.size(), 0.0);
      for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < channels; ++c) {
          result.input[p * channels + c] = grad[c * plane + p];
        }
      }
    }
  }
  return result;
}

}  // namespace benford::nn
