#include "benford/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace benford::svg {

namespace {

constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(lo) * 0.1, 0.5);
      lo -= pad;
      hi += pad;
    } else {
      const double pad = (hi - lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

std::vector<double> ticks(const Range& r) {
  const double step = nice_step(r.hi - r.lo);
  std::vector<double> out;
  for (double t = std::ceil(r.lo / step) * step; t <= r.hi + step * 1e-9; t += step) {
    out.push_back(t);
  }
  return out;
}

void require_finite(double v) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument("svg: non-finite coordinate");
  }
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

Figure& Figure::scatter(std::string label, std::string color, std::vector<Point> points) {
  series.push_back({Mark::Scatter, std::move(label), std::move(color), std::move(points), {}});
  return *this;
}

Figure& Figure::line(std::string label, std::string color, std::vector<Point> points) {
  series.push_back({Mark::Line, std::move(label), std::move(color), std::move(points), {}});
  return *this;
}

Figure& Figure::error_bars(std::string label, std::string color, std::vector<Point> points,
                           std::vector<double> errors) {
  series.push_back({Mark::ErrorBars, std::move(label), std::move(color), std::move(points), std::move(errors)});
  return *this;
}

Figure& Figure::horizontal_rule(double y, std::string label) {
  rules.push_back({y, std::move(label)});
  return *this;
}

std::string Figure::render(int width, int height) const {
  Range xr;
  Range yr;
  for (const auto& s : series) {
    if (s.mark == Mark::ErrorBars && s.errors.size() != s.points.size()) {
      throw std::invalid_argument("svg: error bar count does not match point count");
    }
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto& p = s.points[i];
      require_finite(p.x);
      require_finite(p.y);
      xr.add(p.x);
      yr.add(p.y);
      if (s.mark == Mark::ErrorBars) {
        require_finite(s.errors[i]);
        yr.add(p.y - std::abs(s.errors[i]));
        yr.add(p.y + std::abs(s.errors[i]));
      }
    }
  }
  for (const auto& r : rules) {
    require_finite(r.y);
    yr.add(r.y);
  }
  xr.finish();
  yr.finish();

  const double pw = width - kLeft - kRight;
  const double ph = height - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
       "\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(title) + "</text>\n";

  o += "<g stroke=\"#cccccc\" stroke-width=\"1\">\n";
  const auto xt = ticks(xr);
  const auto yt = ticks(yr);
  for (double t : xt) {
    o += "<line x1=\"" + fmt(sx(t)) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(sx(t)) + "\" y2=\"" +
         fmt(kTop + ph) + "\"/>\n";
  }
  for (double t : yt) {
    o += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(sy(t)) + "\" x2=\"" + fmt(kLeft + pw) + "\" y2=\"" +
         fmt(sy(t)) + "\"/>\n";
  }
  o += "</g>\n";
  o += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : xt) {
    o += "<text x=\"" + fmt(sx(t)) + "\" y=\"" + fmt(kTop + ph + 16) + "\" text-anchor=\"middle\">" +
         tick_label(t) + "</text>\n";
  }
  for (double t : yt) {
    o += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(sy(t) + 4) + "\" text-anchor=\"end\">" +
         tick_label(t) + "</text>\n";
  }
  o += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(height - 12.0) + "\" text-anchor=\"middle\">" +
       escape(x_label) + "</text>\n";
  o += "<text x=\"16\" y=\"" + fmt(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fmt(kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

  for (const auto& s : series) {
    const std::string color = escape(s.color.empty() ? "black" : s.color);
    o += "<g>\n";
    switch (s.mark) {
      case Mark::Scatter:
        for (const auto& p : s.points) {
          o += "<circle cx=\"" + fmt(sx(p.x)) + "\" cy=\"" + fmt(sy(p.y)) + "\" r=\"2.5\" fill=\"" + color +
               "\" fill-opacity=\"0.7\"/>\n";
        }
        break;
      case Mark::Line: {
        if (s.points.empty()) break;
        o += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.points.size(); ++i) {
          if (i > 0) o += ' ';
          o += fmt(sx(s.points[i].x)) + "," + fmt(sy(s.points[i].y));
        }
        o += "\"/>\n";
        break;
      }
      case Mark::ErrorBars:
        for (std::size_t i = 0; i < s.points.size(); ++i) {
          const auto& p = s.points[i];
          const double e = std::abs(s.errors[i]);
          const double x = sx(p.x);
          o += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(sy(p.y - e)) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
               fmt(sy(p.y + e)) + "\" stroke=\"" + color + "\"/>\n";
          for (double end : {p.y - e, p.y + e}) {
            o += "<line x1=\"" + fmt(x - 4) + "\" y1=\"" + fmt(sy(end)) + "\" x2=\"" + fmt(x + 4) +
                 "\" y2=\"" + fmt(sy(end)) + "\" stroke=\"" + color + "\"/>\n";
          }
          o += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(sy(p.y)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
        }
        break;
    }
    o += "</g>\n";
  }

  for (const auto& r : rules) {
    o += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(sy(r.y)) + "\" x2=\"" + fmt(kLeft + pw) + "\" y2=\"" +
         fmt(sy(r.y)) + "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
  }

  double ly = kTop + 8;
  const double lx = kLeft + pw + 12;
  auto legend = [&](const std::string& label, const std::string& color, bool dashed) {
    o += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(lx + 18) + "\" y2=\"" + fmt(ly) +
         "\" stroke=\"" + color + "\" stroke-width=\"2\"" + (dashed ? " stroke-dasharray=\"6 4\"" : "") +
         "/>\n";
    o += "<text x=\"" + fmt(lx + 24) + "\" y=\"" + fmt(ly + 4) + "\">" + escape(label) + "</text>\n";
    ly += 18;
  };
  for (const auto& s : series) {
    if (!s.label.empty()) legend(s.label, escape(s.color.empty() ? "black" : s.color), false);
  }
  for (const auto& r : rules) {
    if (!r.label.empty()) legend(r.label, "black", true);
  }
  o += "</svg>\n";
  return o;
}

void write(const Figure& figure, const std::filesystem::path& path) {
  const std::string text = figure.render();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

}  // namespace benford::svg
