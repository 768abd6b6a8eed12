#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "benford/dataset.hpp"
#include "benford/image.hpp"

namespace benford {

enum class PngErrorKind { Io, Decode, UnsupportedDepth };

class PngError : public std::runtime_error {
 public:
  PngError(PngErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  PngErrorKind kind() const noexcept { return kind_; }

 private:
  PngErrorKind kind_;
};

/// Decodes an 8-bit (or lower) grayscale, RGB or palette PNG to a unit-scale
/// image with 1 or 3 channels. Alpha is composited onto black. 16-bit files
/// raise PngErrorKind::UnsupportedDepth.
ImageTensor decode_png(const std::filesystem::path& path);

/// Writes an 8-bit PNG, rounding to the nearest byte. Unit images are scaled
/// by 255; EightBit images are written as is.
void encode_png(const ImageTensor& image, const std::filesystem::path& path);

struct PngDirOptions {
  /// When set, every image is centre-cropped or zero-padded to (height, width).
  std::optional<std::pair<std::size_t, std::size_t>> target_shape;
};

struct ManifestEntry {
  std::string id;
  std::string source;
  std::string class_name;
  bool loaded = false;
  std::string note;
};

struct PngDirectory {
  LabeledDataset dataset;
  std::vector<std::string> class_names;
  /// Every PNG found, loaded or not.
  std::vector<ManifestEntry> manifest;
};

/// Loads root/<class>/*.png with labels assigned in sorted class-name order.
/// PNGs placed directly in root form one class named after root. Undecodable
/// files are skipped with a warning and recorded in the manifest. Without a
/// target shape, a file whose shape differs from the first image's raises
/// std::invalid_argument.
PngDirectory load_png_dir(const std::filesystem::path& root, const PngDirOptions& options = {});

/// Columns: id,class,source,status,note
void write_manifest_csv(const std::vector<ManifestEntry>& manifest, const std::filesystem::path& path);

}  // namespace benford
