#include "benford/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace benford {

Kernel::Kernel(std::size_t rows, std::size_t cols, std::vector<double> weights)
    : rows_(rows), cols_(cols), weights_(std::move(weights)) {
  if (rows_ == 0 || cols_ == 0) {
    throw std::invalid_argument("Kernel: empty kernel");
  }
  if (weights_.size() != rows_ * cols_) {
    throw std::invalid_argument("Kernel: weight count does not match rows x cols");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) {
      throw std::invalid_argument("Kernel: non-finite weight");
    }
  }
}

Kernel Kernel::sobel_horizontal() {
  return Kernel(3, 3, {-1, 0, 1, -2, 0, 2, -1, 0, 1});
}

Kernel Kernel::sobel_vertical() {
  return Kernel(3, 3, {-1, -2, -1, 0, 0, 0, 1, 2, 1});
}

ImageTensor convolve2d(const ImageTensor& image, const Kernel& kernel) {
  if (image.channels() != 1) {
    throw std::invalid_argument("convolve2d: expected a single-channel image");
  }
  const auto height = static_cast<std::ptrdiff_t>(image.height());
  const auto width = static_cast<std::ptrdiff_t>(image.width());
  const auto rows = static_cast<std::ptrdiff_t>(kernel.rows());
  const auto cols = static_cast<std::ptrdiff_t>(kernel.cols());
  // Zero-based o' = o - 1, so x(i + s_r - o) = x(i + rows/2 - o').
  const std::ptrdiff_t row_shift = rows / 2;
  const std::ptrdiff_t col_shift = cols / 2;

  auto src = image.data();
  std::vector<double> out(src.size(), 0.0);
  for (std::ptrdiff_t o = 0; o < rows; ++o) {
    for (std::ptrdiff_t p = 0; p < cols; ++p) {
      const double w = kernel.at(static_cast<std::size_t>(o), static_cast<std::size_t>(p));
      if (w == 0.0) {
        continue;
      }
      const std::ptrdiff_t di = row_shift - o;
      const std::ptrdiff_t dj = col_shift - p;
      const std::ptrdiff_t i_begin = std::max<std::ptrdiff_t>(0, -di);
      const std::ptrdiff_t i_end = std::min(height, height - di);
      const std::ptrdiff_t j_begin = std::max<std::ptrdiff_t>(0, -dj);
      const std::ptrdiff_t j_end = std::min(width, width - dj);
      for (std::ptrdiff_t i = i_begin; i < i_end; ++i) {
        double* dst = out.data() + i * width;
        const double* row = src.data() + (i + di) * width + dj;
        for (std::ptrdiff_t j = j_begin; j < j_end; ++j) {
          dst[j] += w * row[j];
        }
      }
    }
  }
  return ImageTensor(image.height(), image.width(), 1, std::move(out), Scale::Derived);
}

SobelResponse sobel_gradients(const ImageTensor& image) {
  static const Kernel horizontal = Kernel::sobel_horizontal();
  static const Kernel vertical = Kernel::sobel_vertical();
  return {convolve2d(image, horizontal), convolve2d(image, vertical)};
}

ImageTensor gradient_magnitude(const ImageTensor& image) {
  if (image.scale() == Scale::Unit) {
    throw std::invalid_argument("gradient_magnitude: convert unit-scale images to 0-255 first");
  }
  std::vector<ImageTensor> planes;
  planes.reserve(image.channels());
  for (std::size_t c = 0; c < image.channels(); ++c) {
    const ImageTensor plane = image.channels() == 1 ? image : image.channel(c);
    auto [gx, gy] = sobel_gradients(plane);
    auto x = gx.data();
    auto y = gy.data();
    std::vector<double> magnitude(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      magnitude[i] = std::sqrt(x[i] * x[i] + y[i] * y[i]);
    }
    planes.emplace_back(image.height(), image.width(), 1, std::move(magnitude), Scale::Derived);
  }
  if (planes.size() == 1) {
    return std::move(planes.front());
  }
  return merge_channels(planes, Scale::Derived);
}

}  // namespace benford
