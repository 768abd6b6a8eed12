#include "benford/dataset.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace benford {

void LabeledDataset::validate() const {
  if (images.size() != labels.size() || images.size() != ids.size()) {
    throw std::invalid_argument("LabeledDataset: images, labels and ids differ in length");
  }
  if (!images.empty() && class_count == 0) {
    throw std::invalid_argument("LabeledDataset: class_count must be positive");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i] >= class_count) {
      throw std::invalid_argument("LabeledDataset: label " + std::to_string(labels[i]) + " of " +
                                  ids[i] + " exceeds class_count");
    }
    if (!images[i].same_shape(images.front())) {
      throw std::invalid_argument("LabeledDataset: image " + ids[i] + " has a different shape");
    }
  }
}

LabeledDataset LabeledDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) {
    throw std::out_of_range("LabeledDataset::slice: range out of bounds");
  }
  LabeledDataset out;
  out.class_count = class_count;
  out.images.assign(images.begin() + static_cast<std::ptrdiff_t>(begin),
                    images.begin() + static_cast<std::ptrdiff_t>(end));
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
  out.ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(begin), ids.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

std::size_t LabeledDataset::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return i;
  }
  throw std::out_of_range("LabeledDataset: no record with id " + id);
}

LabeledDataset sample_subset(const LabeledDataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n > dataset.size()) {
    throw std::invalid_argument("sample_subset: requested " + std::to_string(n) + " of " +
                                std::to_string(dataset.size()) + " records");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  LabeledDataset out;
  out.class_count = dataset.class_count;
  out.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.images.push_back(dataset.images[order[i]]);
    out.labels.push_back(dataset.labels[order[i]]);
    out.ids.push_back(dataset.ids[order[i]]);
  }
  return out;
}

LabeledDataset synth_benford_corpus(std::size_t n_images, SynthShape shape, std::uint64_t seed,
                                    double decades) {
  if (shape.height == 0 || shape.width == 0 || (shape.channels != 1 && shape.channels != 3)) {
    throw std::invalid_argument("synth_benford_corpus: invalid shape");
  }
  if (!(decades > 0.0)) {
    throw std::invalid_argument("synth_benford_corpus: decades must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t pixels = shape.height * shape.width;

  LabeledDataset corpus;
  corpus.class_count = 1;
  for (std::size_t n = 0; n < n_images; ++n) {
    const double ceiling = -unit(rng);  // log10 of the brightest amplitude, in (-1, 0]
    std::vector<double> data(pixels * shape.channels);
    for (std::size_t p = 0; p < pixels; ++p) {
      const double t = (static_cast<double>(p) + 0.5) / static_cast<double>(pixels);
      const double amplitude = std::pow(10.0, ceiling - decades * t);
      for (std::size_t c = 0; c < shape.channels; ++c) {
        data[p * shape.channels + c] = amplitude * unit(rng);
      }
    }
    corpus.images.emplace_back(shape.height, shape.width, shape.channels, std::move(data), Scale::Unit);
    corpus.labels.push_back(0);
    corpus.ids.push_back("synth-" + std::to_string(n));
  }
  return corpus;
}

}  // namespace benford
