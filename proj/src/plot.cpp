#include "probe/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace probe {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 190.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
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

// Round tick step covering `span` in about five intervals.
double tick_step(double span) {
  if (span <= 0.0) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  for (const auto& s : plot.series) {
    for (const auto& [x, y] : s.points) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  if (x_hi == x_lo) x_lo -= 1.0, x_hi += 1.0;
  if (y_hi == y_lo) y_lo -= 1.0, y_hi += 1.0;
  const double y_step = tick_step(y_hi - y_lo);
  y_lo = std::floor(y_lo / y_step) * y_step;
  y_hi = std::ceil(y_hi / y_step) * y_step;
  const double x_step = tick_step(x_hi - x_lo);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  const auto py = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(plot.title)
      << "</text>\n";
  for (double y = y_lo; y <= y_hi + y_step * 1e-9; y += y_step) {
    out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(y) << "\" y2=\"" << py(y)
        << "\" stroke=\"#e5e5e5\"/>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
  }
  for (double x = std::ceil(x_lo / x_step) * x_step; x <= x_hi + x_step * 1e-9; x += x_step) {
    out << "<line x1=\"" << px(x) << "\" x2=\"" << px(x) << "\" y1=\"" << kTop + ph << "\" y2=\"" << kTop + ph + 5
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(x) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << num(x)
        << "</text>\n";
  }
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
      << escape(plot.x_label) << "</text>\n";
  out << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(plot.y_label) << "</text>\n";

  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const auto& s = plot.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    auto pts = s.points;
    std::sort(pts.begin(), pts.end());
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) out << px(x) << ',' << py(y) << ' ';
    out << "\"/>\n";
    for (const auto& [x, y] : pts) {
      out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    out << "<line x1=\"" << kLeft + pw + 15 << "\" x2=\"" << kLeft + pw + 35 << "\" y1=\"" << ly << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kLeft + pw + 40 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

LinePlot accuracy_plot(std::span<const EvaluationReport> reports) {
  LinePlot plot{"Accuracy by CDDI", "CDDI", "Accuracy (%)", {}};
  for (Mode mode : {Mode::single_round, Mode::multi_round}) {
    Series cons{std::string(mode_name(mode)) + " C_level", {}};
    Series inst{std::string(mode_name(mode)) + " I_level", {}};
    for (const auto& r : reports) {
      if (r.mode != mode || r.m == 0) continue;
      cons.points.emplace_back(r.cddi, 100.0 * r.acc_cons());
      inst.points.emplace_back(r.cddi, 100.0 * r.acc_inst());
    }
    if (cons.points.empty()) continue;
    plot.series.push_back(std::move(cons));
    plot.series.push_back(std::move(inst));
  }
  return plot;
}

LinePlot importance_plot(std::span<const ImportanceProfile> profiles) {
  LinePlot plot{"Constraint importance by position", "Constraint position", "Mean importance weight", {}};
  for (const auto& p : profiles) {
    Series s{"CDDI " + num(p.cddi), {}};
    for (std::size_t j = 0; j < p.position_mean.size(); ++j) {
      if (p.position_count[j] > 0) s.points.emplace_back(static_cast<double>(j + 1), p.position_mean[j]);
    }
    plot.series.push_back(std::move(s));
  }
  return plot;
}

}  // namespace probe
