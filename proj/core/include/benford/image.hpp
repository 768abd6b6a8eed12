#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace benford {

/// Value range carried by an ImageTensor.
///
/// Unit and EightBit images are range-checked on construction. Derived covers
/// everything computed from an image (convolution responses, gradient
/// magnitudes, loss gradients, perturbations): values must be finite but are
/// not bounded.
enum class Scale { Unit, EightBit, Derived };

std::string_view to_string(Scale scale);

/// H x W x C real-valued raster stored row-major as (row, col, channel).
class ImageTensor {
 public:
  ImageTensor() = default;

  /// Zero-filled image.
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, Scale scale);

  /// Takes ownership of `data`; throws std::invalid_argument if the length or
  /// any value violates the invariants for `scale`.
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<double> data, Scale scale);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  Scale scale() const noexcept { return scale_; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }

  double at(std::size_t row, std::size_t col, std::size_t channel = 0) const {
    return data_[index(row, col, channel)];
  }
  double& at(std::size_t row, std::size_t col, std::size_t channel = 0) {
    return data_[index(row, col, channel)];
  }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Copies one channel out as a single-channel image with the same scale.
  ImageTensor channel(std::size_t channel) const;

  /// Unit images are multiplied by 255; EightBit and Derived are returned as is.
  ImageTensor to_eight_bit() const;

  /// Re-tags the scale after checking the values fit it.
  ImageTensor with_scale(Scale scale) const;

  /// Throws std::invalid_argument if the data violates the scale invariants.
  void validate() const;

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t index(std::size_t row, std::size_t col, std::size_t channel) const noexcept {
    return (row * width_ + col) * channels_ + channel;
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
  Scale scale_ = Scale::Derived;
};

/// Stacks single-channel planes back into one interleaved image.
ImageTensor merge_channels(std::span<const ImageTensor> planes, Scale scale);

}  // namespace benford
