#pragma once

#include <cstddef>
#include <vector>

#include "benford/image.hpp"

namespace benford {

/// Dense O x P filter, row-major.
class Kernel {
 public:
  Kernel(std::size_t rows, std::size_t cols, std::vector<double> weights);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  /// Zero-based (o, p); the formula's 1-based K(o, p) is at(o - 1, p - 1).
  double at(std::size_t o, std::size_t p) const { return weights_[o * cols_ + p]; }

  static Kernel sobel_horizontal();  ///< [-1 0 1; -2 0 2; -1 0 1]
  static Kernel sobel_vertical();    ///< [-1 -2 -1; 0 0 0; 1 2 1]

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> weights_;
};

/// True 2-D convolution with zero padding and same-size output:
///
///   out(i, j) = sum_{o=1..O} sum_{p=1..P} x(i + s_r - o, j + s_c - p) * K(o, p)
///
/// with s_r = floor(O / 2) + 1 and s_c = floor(P / 2) + 1. The shift centres
/// odd kernels on the output pixel; a 1x1 kernel reproduces the input scaled by
/// its weight. Samples outside the image read as 0.
///
/// Throws std::invalid_argument for multi-channel input.
ImageTensor convolve2d(const ImageTensor& image, const Kernel& kernel);

struct SobelResponse {
  ImageTensor gx;
  ImageTensor gy;
};

SobelResponse sobel_gradients(const ImageTensor& image);

/// Per-channel Sobel gradient magnitude sqrt(gx^2 + gy^2). The output keeps the
/// input's channel count and carries Scale::Derived.
///
/// Unit-scale input is rejected: callers convert to the 0-255 range first so
/// the digit statistics are taken on the pixel scale.
ImageTensor gradient_magnitude(const ImageTensor& image);

}  // namespace benford
