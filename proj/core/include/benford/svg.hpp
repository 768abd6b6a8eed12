#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace benford::svg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class Mark { Scatter, Line, ErrorBars };

struct Series {
  Mark mark = Mark::Line;
  std::string label;
  std::string color;
  std::vector<Point> points;
  /// Half-heights of the error bars, one per point (ErrorBars only).
  std::vector<double> errors;
};

struct Rule {
  double y = 0.0;
  std::string label;
};

/// A single 2-D chart with linear axes. Rendering is deterministic: the same
/// figure always produces the same bytes.
struct Figure {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Dashed horizontal reference lines (thresholds).
  std::vector<Rule> rules;

  Figure& scatter(std::string label, std::string color, std::vector<Point> points);
  Figure& line(std::string label, std::string color, std::vector<Point> points);
  Figure& error_bars(std::string label, std::string color, std::vector<Point> points,
                     std::vector<double> errors);
  Figure& horizontal_rule(double y, std::string label);

  /// Throws std::invalid_argument on non-finite coordinates or mismatched
  /// error-bar lengths.
  std::string render(int width = 640, int height = 420) const;
};

/// Renders and writes; I/O errors raise std::runtime_error naming the path.
void write(const Figure& figure, const std::filesystem::path& path);

/// XML-escapes &, <, >, " and '.
std::string escape(const std::string& text);

}  // namespace benford::svg
