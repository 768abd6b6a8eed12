#include "benford/idx.hpp"

#include <spdlog/spdlog.h>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace benford {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (static_cast<std::uint32_t>(bytes[at]) << 24) | (static_cast<std::uint32_t>(bytes[at + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[at + 2]) << 8) | static_cast<std::uint32_t>(bytes[at + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

void check_payload(std::size_t available, std::uint64_t expected, const char* what) {
  if (available < expected) {
    throw IdxError(IdxErrorKind::Truncated, std::string(what) + ": truncated payload (" +
                                                std::to_string(available) + " of " +
                                                std::to_string(expected) + " bytes)");
  }
  if (available > expected) {
    throw IdxError(IdxErrorKind::TrailingData,
                   std::string(what) + ": " + std::to_string(available - expected) + " trailing bytes");
  }
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IdxError(IdxErrorKind::Io, "cannot write " + path.string());
  }
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) {
    throw IdxError(IdxErrorKind::Truncated, "IDX images: truncated header");
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kImageMagic) {
    throw IdxError(IdxErrorKind::BadMagic, "IDX images: bad magic " + hex(magic));
  }
  IdxImages images;
  images.count = read_be32(bytes, 4);
  images.rows = read_be32(bytes, 8);
  images.cols = read_be32(bytes, 12);
  const std::uint64_t expected =
      static_cast<std::uint64_t>(images.count) * images.rows * images.cols;
  check_payload(bytes.size() - 16, expected, "IDX images");
  images.pixels.assign(bytes.begin() + 16, bytes.end());
  return images;
}

IdxLabels parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) {
    throw IdxError(IdxErrorKind::Truncated, "IDX labels: truncated header");
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kLabelMagic) {
    throw IdxError(IdxErrorKind::BadMagic, "IDX labels: bad magic " + hex(magic));
  }
  const std::uint32_t count = read_be32(bytes, 4);
  check_payload(bytes.size() - 8, count, "IDX labels");
  return {std::vector<std::uint8_t>(bytes.begin() + 8, bytes.end())};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  if (images.pixels.size() != static_cast<std::uint64_t>(images.count) * images.rows * images.cols) {
    throw std::invalid_argument("encode_idx_images: pixel count does not match header");
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  write_be32(out, kImageMagic);
  write_be32(out, images.count);
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const IdxLabels& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.labels.size());
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.labels.size()));
  out.insert(out.end(), labels.labels.begin(), labels.labels.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (file == nullptr) {
    throw IdxError(IdxErrorKind::Io, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes;
  std::uint8_t buffer[1 << 16];
  int got = 0;
  while ((got = gzread(file, buffer, sizeof buffer)) > 0) {
    bytes.insert(bytes.end(), buffer, buffer + got);
  }
  const bool failed = got < 0;
  gzclose(file);
  if (failed) {
    throw IdxError(IdxErrorKind::Io, "read error in " + path.string());
  }
  return bytes;
}

LabeledDataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path, const std::string& id_prefix) {
  const IdxImages images = parse_idx_images(read_file_bytes(images_path));
  const IdxLabels labels = parse_idx_labels(read_file_bytes(labels_path));
  if (images.count != labels.labels.size()) {
    throw IdxError(IdxErrorKind::CountMismatch,
                   "IDX count mismatch: " + std::to_string(images.count) + " images in " +
                       images_path.string() + " but " + std::to_string(labels.labels.size()) +
                       " labels in " + labels_path.string());
  }
  LabeledDataset dataset;
  dataset.class_count = 10;
  if (images.count == 0) {
    spdlog::warn("{}: IDX file holds zero images", images_path.string());
    return dataset;
  }
  std::size_t max_label = 0;
  for (auto l : labels.labels) max_label = std::max<std::size_t>(max_label, l);
  dataset.class_count = std::max<std::size_t>(10, max_label + 1);

  const std::size_t pixels = static_cast<std::size_t>(images.rows) * images.cols;
  const int width = static_cast<int>(std::to_string(images.count).size());
  dataset.images.reserve(images.count);
  for (std::size_t n = 0; n < images.count; ++n) {
    std::vector<double> data(pixels);
    for (std::size_t p = 0; p < pixels; ++p) {
      data[p] = images.pixels[n * pixels + p] / 255.0;
    }
    dataset.images.emplace_back(images.rows, images.cols, 1, std::move(data), Scale::Unit);
    dataset.labels.push_back(labels.labels[n]);
    char id[64];
    std::snprintf(id, sizeof id, "%s-%0*zu", id_prefix.c_str(), width, n);
    dataset.ids.emplace_back(id);
  }
  return dataset;
}

void write_mnist_idx(const LabeledDataset& dataset, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
  dataset.validate();
  IdxImages images;
  IdxLabels labels;
  images.count = static_cast<std::uint32_t>(dataset.size());
  if (!dataset.empty()) {
    if (dataset.images.front().channels() != 1) {
      throw std::invalid_argument("write_mnist_idx: IDX images must be single-channel");
    }
    images.rows = static_cast<std::uint32_t>(dataset.images.front().height());
    images.cols = static_cast<std::uint32_t>(dataset.images.front().width());
  }
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    const ImageTensor bytes = dataset.images[n].to_eight_bit();
    for (double v : bytes.data()) {
      images.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))));
    }
    if (dataset.labels[n] > 255) {
      throw std::invalid_argument("write_mnist_idx: label does not fit in a byte");
    }
    labels.labels.push_back(static_cast<std::uint8_t>(dataset.labels[n]));
  }
  write_bytes(images_path, encode_idx_images(images));
  write_bytes(labels_path, encode_idx_labels(labels));
}

MnistSplits load_mnist_dir(const std::filesystem::path& dir) {
  auto find = [&](const std::string& stem) {
    for (const auto& candidate : {dir / stem, dir / (stem + ".gz")}) {
      if (std::filesystem::exists(candidate)) return candidate;
    }
    throw IdxError(IdxErrorKind::Io, "missing " + stem + "[.gz] in " + dir.string());
  };
  MnistSplits splits;
  splits.train = load_mnist_idx(find("train-images-idx3-ubyte"), find("train-labels-idx1-ubyte"), "train");
  splits.test = load_mnist_idx(find("t10k-images-idx3-ubyte"), find("t10k-labels-idx1-ubyte"), "test");
  return splits;
}

}  // namespace benford
