#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace benford::csv {

/// Shortest decimal that round-trips; NaN is written as an empty field.
std::string number(double value);

/// RFC 4180 quoting when the field contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Row-at-a-time writer with '\n' line endings.
class Writer {
 public:
  /// Throws std::runtime_error (with the path) if the file cannot be opened.
  explicit Writer(const std::filesystem::path& path);
  void row(const std::vector<std::string>& fields);
  /// Flushes and throws std::runtime_error if any write failed.
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

using Table = std::vector<std::vector<std::string>>;

/// Parses a file written by Writer (quoted fields allowed). The header row is
/// included.
Table read(const std::filesystem::path& path);

}  // namespace benford::csv
