#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "benford/image.hpp"

namespace benford::nn {

/// 3x3 convolution, stride 1, zero padding 1 (spatial size preserved).
struct Conv2D {
  std::size_t out_channels = 0;
  bool operator==(const Conv2D&) const = default;
};
struct ReLU {
  bool operator==(const ReLU&) const = default;
};
/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
struct MaxPool2 {
  bool operator==(const MaxPool2&) const = default;
};
/// Channel-major: element (row, col, c) lands at c * H * W + row * W + col.
struct Flatten {
  bool operator==(const Flatten&) const = default;
};
struct Dense {
  std::size_t out_dim = 0;
  bool operator==(const Dense&) const = default;
};
/// Must be the last layer; its width is the class count.
struct Softmax {
  bool operator==(const Softmax&) const = default;
};

using Layer = std::variant<Conv2D, ReLU, MaxPool2, Flatten, Dense, Softmax>;

std::string layer_name(const Layer& layer);

/// Activation shape. Images enter as (H, W, C); after Flatten every layer is
/// (1, 1, n).
struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return height * width * channels; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> probabilities;
  /// d loss / d input, same shape as the image; empty unless requested.
  std::vector<double> input;
};

/// Feed-forward classifier with cross-entropy loss and exact backprop.
///
/// All parameters live in one flat vector ordered layer by layer; convolution
/// weights are [out][in][3][3] followed by the bias, dense weights are
/// [out][in] followed by the bias. Freshly constructed models are all-zero;
/// call initialize() before training.
class Model {
 public:
  /// Throws std::invalid_argument if consecutive shapes do not compose or the
  /// stack does not end in Softmax.
  Model(Shape input, std::vector<Layer> layers);

  /// Conv3x3-16, ReLU, MaxPool, Conv3x3-32, ReLU, MaxPool, Dense-128, ReLU,
  /// Dense-classes, Softmax.
  static Model desk_cnn(Shape input = {28, 28, 1}, std::size_t classes = 10);

  /// He-style uniform fan-in init: weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
  /// biases zero.
  void initialize(std::uint64_t seed);

  const Shape& input_shape() const noexcept { return input_; }
  std::size_t num_classes() const noexcept { return shapes_.back().size(); }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  /// shapes()[k] is the input shape of layer k; shapes().back() is the output.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  /// Weight and bias slices of layer k; empty for parameter-free layers.
  std::span<double> weights(std::size_t layer);
  std::span<double> bias(std::size_t layer);

  /// Class probabilities (positive, summing to 1).
  std::vector<double> forward(const ImageTensor& image) const;
  /// Pre-softmax scores.
  std::vector<double> logits(const ImageTensor& image) const;
  std::size_t predict(const ImageTensor& image) const;

  /// -log p(label), computed from the logits with log-sum-exp.
  double loss(const ImageTensor& image, std::size_t label) const;

  /// d loss / d image, with the image's shape and Scale::Derived.
  ImageTensor grad_input(const ImageTensor& image, std::size_t label) const;

  /// One forward/backward pass. Parameter gradients are *added* into
  /// `param_grad` when it is non-empty (it must then have parameter_count()
  /// entries); the input gradient is filled when `want_input` is set.
  LossGradient backward(const ImageTensor& image, std::size_t label, std::span<double> param_grad,
                        bool want_input) const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  struct Trace;

  std::vector<double> to_planar(const ImageTensor& image) const;
  void check_input(const ImageTensor& image) const;
  void check_label(std::size_t label) const;
  void run_forward(const ImageTensor& image, Trace& trace) const;

  Shape input_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> param_offset_;  // per layer; weights start here
  std::vector<std::size_t> weight_count_;
  std::vector<std::size_t> bias_count_;
  std::vector<double> params_;
};

}  // namespace benford::nn
