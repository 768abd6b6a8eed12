#include "benford/image.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace benford {

std::string_view to_string(Scale scale) {
  switch (scale) {
    case Scale::Unit:
      return "unit";
    case Scale::EightBit:
      return "eight_bit";
    case Scale::Derived:
      return "derived";
  }
  return "unknown";
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, Scale scale)
    : ImageTensor(height, width, channels, std::vector<double>(height * width * channels, 0.0),
                  scale) {}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<double> data, Scale scale)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)), scale_(scale) {
  if (height_ == 0 || width_ == 0) {
    throw std::invalid_argument("ImageTensor: height and width must be positive");
  }
  if (channels_ != 1 && channels_ != 3) {
    throw std::invalid_argument("ImageTensor: channels must be 1 or 3, got " +
                                std::to_string(channels_));
  }
  if (data_.size() != height_ * width_ * channels_) {
    throw std::invalid_argument("ImageTensor: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(height_) + "x" +
                                std::to_string(width_) + "x" + std::to_string(channels_));
  }
  validate();
}

void ImageTensor::validate() const {
  double upper = 0.0;
  switch (scale_) {
    case Scale::Unit:
      upper = 1.0;
      break;
    case Scale::EightBit:
      upper = 255.0;
      break;
    case Scale::Derived:
      break;
  }
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("ImageTensor: non-finite value");
    }
    if (scale_ != Scale::Derived && (v < 0.0 || v > upper)) {
      throw std::invalid_argument("ImageTensor: value " + std::to_string(v) + " outside the " +
                                  std::string(to_string(scale_)) + " range");
    }
  }
}

ImageTensor ImageTensor::channel(std::size_t channel) const {
  if (channel >= channels_) {
    throw std::out_of_range("ImageTensor::channel: index out of range");
  }
  std::vector<double> plane(height_ * width_);
  for (std::size_t i = 0; i < plane.size(); ++i) {
    plane[i] = data_[i * channels_ + channel];
  }
  return ImageTensor(height_, width_, 1, std::move(plane), scale_);
}

ImageTensor ImageTensor::to_eight_bit() const {
  if (scale_ != Scale::Unit) {
    return *this;
  }
  std::vector<double> scaled(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    scaled[i] = data_[i] * 255.0;
  }
  return ImageTensor(height_, width_, channels_, std::move(scaled), Scale::EightBit);
}

ImageTensor ImageTensor::with_scale(Scale scale) const {
  return ImageTensor(height_, width_, channels_, data_, scale);
}

ImageTensor merge_channels(std::span<const ImageTensor> planes, Scale scale) {
  if (planes.empty()) {
    throw std::invalid_argument("merge_channels: no planes");
  }
  const auto& first = planes.front();
  const std::size_t pixels = first.height() * first.width();
  std::vector<double> data(pixels * planes.size());
  for (std::size_t c = 0; c < planes.size(); ++c) {
    if (planes[c].channels() != 1 || planes[c].height() != first.height() ||
        planes[c].width() != first.width()) {
      throw std::invalid_argument("merge_channels: planes must be single-channel and equal-sized");
    }
    auto src = planes[c].data();
    for (std::size_t i = 0; i < pixels; ++i) {
      data[i * planes.size() + c] = src[i];
    }
  }
  return ImageTensor(first.height(), first.width(), planes.size(), std::move(data), scale);
}

}  // namespace benford
