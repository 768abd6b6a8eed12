#include "benford/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

namespace benford::nn {

namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'B', 'N', 'F', 'D', 'N', 'E', 'T', 0};
constexpr std::uint32_t kVersion = 1;

enum Tag : std::uint8_t { kConv = 1, kRelu = 2, kPool = 3, kFlatten = 4, kDense = 5, kSoftmax = 6 };

class Writer {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (in_.size() - pos_ < n) {
      throw CheckpointError("checkpoint: truncated at byte " + std::to_string(pos_));
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.input_shape().height));
  w.u32(static_cast<std::uint32_t>(model.input_shape().width));
  w.u32(static_cast<std::uint32_t>(model.input_shape().channels));
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const Layer& layer : model.layers()) {
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
      w.u8(kConv);
      w.u32(static_cast<std::uint32_t>(c->out_channels));
    } else if (std::holds_alternative<ReLU>(layer)) {
      w.u8(kRelu);
      w.u32(0);
    } else if (std::holds_alternative<MaxPool2>(layer)) {
      w.u8(kPool);
      w.u32(0);
    } else if (std::holds_alternative<Flatten>(layer)) {
      w.u8(kFlatten);
      w.u32(0);
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      w.u8(kDense);
      w.u32(static_cast<std::uint32_t>(d->out_dim));
    } else {
      w.u8(kSoftmax);
      w.u32(0);
    }
  }
  w.u64(model.parameter_count());
  for (double p : model.parameters()) w.f64(p);
  w.u32(crc(w.buffer()));
  return std::move(w.buffer());
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw CheckpointError("checkpoint: bad magic (not a model checkpoint)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  Shape input;
  input.height = r.u32();
  input.width = r.u32();
  input.channels = r.u32();
  const std::uint32_t layer_count = r.u32();
  if (layer_count > r.remaining() / 5) {
    throw CheckpointError("checkpoint: truncated layer table");
  }
  std::vector<Layer> layers;
  layers.reserve(layer_count);
  for (std::uint32_t k = 0; k < layer_count; ++k) {
    const std::uint8_t tag = r.u8();
    const std::uint32_t arg = r.u32();
    switch (tag) {
      case kConv:
        layers.emplace_back(Conv2D{arg});
        break;
      case kRelu:
        layers.emplace_back(ReLU{});
        break;
      case kPool:
        layers.emplace_back(MaxPool2{});
        break;
      case kFlatten:
        layers.emplace_back(Flatten{});
        break;
      case kDense:
        layers.emplace_back(Dense{arg});
        break;
      case kSoftmax:
        layers.emplace_back(Softmax{});
        break;
      default:
        throw CheckpointError("checkpoint: unknown layer tag " + std::to_string(tag) + " at layer " +
                              std::to_string(k));
    }
  }

  std::optional<Model> model;
  try {
    model.emplace(input, std::move(layers));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: inconsistent architecture: ") + e.what());
  }

  const std::uint64_t count = r.u64();
  if (count != model->parameter_count()) {
    throw CheckpointError("checkpoint: parameter count " + std::to_string(count) +
                          " does not match architecture (" +
                          std::to_string(model->parameter_count()) + ")");
  }
  if (r.remaining() != count * 8 + 4) {
    throw CheckpointError(r.remaining() < count * 8 + 4 ? "checkpoint: truncated parameter block"
                                                        : "checkpoint: trailing bytes after checksum");
  }
  auto params = model->parameters();
  for (std::uint64_t i = 0; i < count; ++i) params[i] = r.f64();
  const std::uint32_t expected = crc(bytes.first(r.position()));
  if (r.u32() != expected) {
    throw CheckpointError("checkpoint: checksum mismatch (file corrupt)");
  }
  return std::move(*model);
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw CheckpointError("checkpoint: write failed for " + path.string());
  }
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("checkpoint: cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace benford::nn
