#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "benford/image.hpp"
#include "benford/train.hpp"

namespace benford {

/// Images with labels and stable string ids. All images share one shape.
struct LabeledDataset {
  std::vector<ImageTensor> images;
  std::vector<std::size_t> labels;
  std::vector<std::string> ids;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  /// Throws std::invalid_argument if lengths differ, a label is out of range,
  /// or shapes are not uniform.
  void validate() const;

  nn::LabeledView view() const { return {images, labels}; }

  /// Records [begin, end) as a new dataset.
  LabeledDataset slice(std::size_t begin, std::size_t end) const;

  /// Index of the record with this id; throws std::out_of_range if absent.
  std::size_t index_of(const std::string& id) const;
};

/// Uniform sample of n records without replacement (partial Fisher-Yates on a
/// seeded mt19937_64). Ids and labels travel with their images.
/// Throws std::invalid_argument when n exceeds the dataset size.
LabeledDataset sample_subset(const LabeledDataset& dataset, std::size_t n, std::uint64_t seed);

struct SynthShape {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 1;
};

/// Unit-scale images whose gradient magnitudes have approximately Benford
/// leading digits.
///
/// Each pixel is amplitude(i, j) * u with u ~ U(0, 1). The amplitude is
/// 10^a(i, j), where a falls linearly along the raster order through
/// `decades` decades below a random per-image ceiling. Neighbouring pixels share
/// nearly the same amplitude, so each gradient magnitude is a local amplitude
/// times an O(1) factor, and the amplitudes' log-uniform spread makes the
/// mantissas close to uniform on a log scale. All records get label 0.
LabeledDataset synth_benford_corpus(std::size_t n_images, SynthShape shape, std::uint64_t seed,
                                    double decades = 4.0);

}  // namespace benford
