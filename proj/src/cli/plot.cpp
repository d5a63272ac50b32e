#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "numlab/errors.hpp"
#include "numlab/experiment.hpp"

namespace numlab::experiment {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;  // legend column
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr int kTicks = 5;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
      const double pad = std::max(0.5, 0.1 * std::abs(lo));
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string render_svg(const std::vector<Series>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  if (series.empty()) throw EmptySeries("nothing to plot");
  Range xr, yr;
  for (const auto& s : series) {
    if (s.y.empty()) throw EmptySeries("series '" + s.label + "' has no points");
    if (!s.x.empty() && s.x.size() != s.y.size())
      throw InvalidArgument("series '" + s.label + "' has mismatched x and y lengths");
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      xr.add(s.x.empty() ? static_cast<double>(i) : s.x[i]);
      yr.add(s.y[i]);
    }
  }
  xr.finish();
  yr.finish();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
    << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight)
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n";

  // Axes box and ticks.
  o << "<g stroke=\"black\" fill=\"none\">\n"
    << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw)
    << "\" height=\"" << fmt(ph) << "\"/>\n";
  for (int t = 0; t <= kTicks; ++t) {
    const double fx = xr.lo + (xr.hi - xr.lo) * t / kTicks;
    const double fy = yr.lo + (yr.hi - yr.lo) * t / kTicks;
    o << "<line x1=\"" << fmt(px(fx)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(px(fx))
      << "\" y2=\"" << fmt(kTop + ph + 5) << "\"/>\n";
    o << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(py(fy)) << "\" x2=\"" << fmt(kLeft)
      << "\" y2=\"" << fmt(py(fy)) << "\"/>\n";
  }
  o << "</g>\n<g fill=\"black\">\n";
  for (int t = 0; t <= kTicks; ++t) {
    const double fx = xr.lo + (xr.hi - xr.lo) * t / kTicks;
    const double fy = yr.lo + (yr.hi - yr.lo) * t / kTicks;
    o << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << fmt(kTop + ph + 18)
      << "\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n";
    o << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(py(fy) + 4)
      << "\" text-anchor=\"end\">" << tick_label(fy) << "</text>\n";
  }
  if (!x_label.empty())
    o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 10)
      << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  if (!y_label.empty())
    o << "<text x=\"16\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt(kTop + ph / 2) << ")\">" << escape(y_label) << "</text>\n";
  o << "</g>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      const double x = s.x.empty() ? static_cast<double>(i) : s.x[i];
      if (!std::isfinite(x) || !std::isfinite(s.y[i])) continue;
      if (!first) o << ' ';
      o << fmt(px(x)) << ',' << fmt(py(s.y[i]));
      first = false;
    }
    o << "\"><title>" << escape(s.label) << "</title></polyline>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    const double lx = kLeft + pw + 15;
    o << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 25)
      << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << fmt(lx + 32) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void emit_plot(const std::vector<Series>& series, const std::filesystem::path& path,
               const std::string& title, const std::string& x_label,
               const std::string& y_label) {
  const std::string svg = render_svg(series, title, x_label, y_label);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << svg;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace numlab::experiment
