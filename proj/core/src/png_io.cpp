#include "benford/png_io.hpp"

#include <png.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "benford/csv.hpp"

namespace benford {

namespace {

bool is_png(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir, bool directories) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (directories ? entry.is_directory() : (entry.is_regular_file() && is_png(entry.path()))) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ImageTensor fit_to(const ImageTensor& image, std::size_t height, std::size_t width) {
  if (image.height() == height && image.width() == width) return image;
  ImageTensor out(height, width, image.channels(), image.scale());
  // Offsets of the source window (crop) or destination window (pad).
  const auto offset = [](std::size_t from, std::size_t to) {
    return static_cast<std::ptrdiff_t>(from) / 2 - static_cast<std::ptrdiff_t>(to) / 2;
  };
  const std::ptrdiff_t dr = offset(image.height(), height);
  const std::ptrdiff_t dc = offset(image.width(), width);
  for (std::size_t r = 0; r < height; ++r) {
    const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r) + dr;
    if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(image.height())) continue;
    for (std::size_t c = 0; c < width; ++c) {
      const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c) + dc;
      if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(image.width())) continue;
      for (std::size_t ch = 0; ch < image.channels(); ++ch) {
        out.at(r, c, ch) = image.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc), ch);
      }
    }
  }
  return out;
}

}  // namespace

ImageTensor decode_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    const std::string message = image.message;
    png_image_free(&image);
    const bool missing = !std::filesystem::exists(path);
    throw PngError(missing ? PngErrorKind::Io : PngErrorKind::Decode, path.string() + ": " + message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw PngError(PngErrorKind::UnsupportedDepth,
                   path.string() + ": 16-bit PNGs are not supported (8-bit depth required)");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = color ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw PngError(PngErrorKind::Decode, path.string() + ": " + message);
  }
  std::vector<double> data(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) data[i] = buffer[i] / 255.0;
  return ImageTensor(image.height, image.width, channels, std::move(data), Scale::Unit);
}

void encode_png(const ImageTensor& image, const std::filesystem::path& path) {
  if (image.scale() == Scale::Derived) {
    throw std::invalid_argument("encode_png: only unit or 8-bit images can be written");
  }
  const ImageTensor bytes = image.to_eight_bit();
  std::vector<png_byte> buffer(bytes.size());
  auto src = bytes.data();
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    buffer[i] = static_cast<png_byte>(std::lround(std::clamp(src[i], 0.0, 255.0)));
  }
  png_image out;
  std::memset(&out, 0, sizeof out);
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(image.width());
  out.height = static_cast<png_uint_32>(image.height());
  out.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&out, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    const std::string message = out.message;
    png_image_free(&out);
    throw PngError(PngErrorKind::Io, path.string() + ": " + message);
  }
}

PngDirectory load_png_dir(const std::filesystem::path& root, const PngDirOptions& options) {
  if (!std::filesystem::is_directory(root)) {
    throw PngError(PngErrorKind::Io, root.string() + " is not a directory");
  }
  PngDirectory result;
  std::vector<std::pair<std::string, std::vector<std::filesystem::path>>> classes;
  for (const auto& dir : sorted_entries(root, true)) {
    auto files = sorted_entries(dir, false);
    if (!files.empty()) classes.emplace_back(dir.filename().string(), std::move(files));
  }
  if (auto loose = sorted_entries(root, false); !loose.empty()) {
    const auto name = std::filesystem::absolute(root).lexically_normal().filename().string();
    classes.insert(classes.begin(), {name.empty() ? "root" : name, std::move(loose)});
  }

  LabeledDataset& dataset = result.dataset;
  dataset.class_count = classes.size();
  for (std::size_t label = 0; label < classes.size(); ++label) {
    const auto& [name, files] = classes[label];
    result.class_names.push_back(name);
    for (const auto& file : files) {
      ManifestEntry entry;
      entry.id = name + "/" + file.filename().string();
      entry.source = file.string();
      entry.class_name = name;
      try {
        ImageTensor image = decode_png(file);
        if (options.target_shape) {
          image = fit_to(image, options.target_shape->first, options.target_shape->second);
        } else if (!dataset.images.empty() &&
                   (image.height() != dataset.images.front().height() ||
                    image.width() != dataset.images.front().width())) {
          throw std::invalid_argument("load_png_dir: " + file.string() + " is " +
                                      std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                                      " but earlier images are " +
                                      std::to_string(dataset.images.front().height()) + "x" +
                                      std::to_string(dataset.images.front().width()) +
                                      "; configure a target shape to crop or pad");
        }
        if (!dataset.images.empty() && image.channels() != dataset.images.front().channels()) {
          throw PngError(PngErrorKind::Decode,
                         file.string() + ": channel count differs from the rest of the directory");
        }
        dataset.images.push_back(std::move(image));
        dataset.labels.push_back(label);
        dataset.ids.push_back(entry.id);
        entry.loaded = true;
      } catch (const PngError& e) {
        spdlog::warn("skipping {}", e.what());
        entry.note = e.what();
      }
      result.manifest.push_back(std::move(entry));
    }
  }
  return result;
}

void write_manifest_csv(const std::vector<ManifestEntry>& manifest, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.row({"id", "class", "source", "status", "note"});
  for (const auto& e : manifest) {
    out.row({e.id, e.class_name, e.source, e.loaded ? "loaded" : "skipped", e.note});
  }
  out.close();
}

}  // namespace benford
