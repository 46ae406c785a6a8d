#include "mirror_sinkhorn/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mirror_sinkhorn/experiment.hpp"

namespace mirror_sinkhorn {

namespace {

const char* const kPalette[] = {"#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

struct Points {
  std::vector<double> x, mid, lo, hi;
  bool band = false;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

Points extract(const PlotSeries& s, const PlotSpec& spec, const std::string& metric) {
  const auto x = column_values(s.summary, spec.x_column);
  const auto mid = column_values(s.summary, metric + "_median");
  Points p;
  const bool band = s.summary.column(metric + "_p10") >= 0 && s.summary.column(metric + "_p90") >= 0;
  std::vector<double> lo, hi;
  if (band) {
    lo = column_values(s.summary, metric + "_p10");
    hi = column_values(s.summary, metric + "_p90");
  }
  const auto ok_x = [&spec](double v) { return std::isfinite(v) && (!spec.log_x || v > 0.0); };
  const auto ok_y = [&spec](double v) { return std::isfinite(v) && (!spec.log_y || v > 0.0); };
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (!ok_x(x[r]) || !ok_y(mid[r])) continue;
    p.x.push_back(x[r]);
    p.mid.push_back(mid[r]);
    p.lo.push_back(band && ok_y(lo[r]) ? lo[r] : mid[r]);
    p.hi.push_back(band && ok_y(hi[r]) ? hi[r] : mid[r]);
  }
  p.band = band;
  if (p.x.empty()) throw ParseError("series '" + s.label + "' has no plottable " + metric + " values");
  return p;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;

  double map(double v, double a, double b) const {
    const double u = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
    return a + u * (b - a);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(lo); e <= std::floor(hi) + 1e-9; e += 1.0) out.push_back(std::pow(10.0, e));
      if (out.empty()) out.push_back(std::pow(10.0, 0.5 * (lo + hi)));
    } else {
      for (int k = 0; k <= 4; ++k) out.push_back(lo + (hi - lo) * k / 4.0);
    }
    return out;
  }
};

Axis make_axis(double lo, double hi, bool log) {
  Axis a;
  a.log = log;
  a.lo = log ? std::log10(lo) : lo;
  a.hi = log ? std::log10(hi) : hi;
  if (a.hi - a.lo < 1e-12) {
    a.lo -= 0.5;
    a.hi += 0.5;
  }
  return a;
}

}  // namespace

std::string render_plot_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  if (series.empty()) throw ParseError("plot needs at least one series");
  if (spec.metrics.empty()) throw ParseError("plot needs at least one metric");

  const double margin_l = 70.0, margin_r = 20.0, margin_t = 40.0, margin_b = 50.0;
  const double w = spec.panel_width, h = spec.panel_height;
  const double total_w = static_cast<double>(spec.metrics.size()) * (w + margin_l + margin_r);
  const double total_h = h + margin_t + margin_b + 18.0 * static_cast<double>(series.size());

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(total_w) + "\" height=\"" +
                    fmt(total_h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty()) {
    svg += "<text x=\"" + fmt(total_w / 2) + "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">" +
           escape(spec.title) + "</text>\n";
  }

  for (std::size_t p = 0; p < spec.metrics.size(); ++p) {
    const auto& metric = spec.metrics[p];
    std::vector<Points> pts;
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo, y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : series) {
      pts.push_back(extract(s, spec, metric));
      const auto& q = pts.back();
      x_lo = std::min(x_lo, *std::min_element(q.x.begin(), q.x.end()));
      x_hi = std::max(x_hi, *std::max_element(q.x.begin(), q.x.end()));
      y_lo = std::min(y_lo, *std::min_element(q.lo.begin(), q.lo.end()));
      y_hi = std::max(y_hi, *std::max_element(q.hi.begin(), q.hi.end()));
    }
    const Axis ax = make_axis(x_lo, x_hi, spec.log_x);
    const Axis ay = make_axis(y_lo, y_hi, spec.log_y);
    const double left = static_cast<double>(p) * (w + margin_l + margin_r) + margin_l;
    const double top = margin_t;
    const double bottom = top + h;
    const double right = left + w;

    svg += "<g>\n<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (double t : ax.ticks()) {
      const double x = ax.map(t, left, right);
      svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(bottom) + "\" x2=\"" + fmt(x) + "\" y2=\"" + fmt(bottom + 4) +
             "\" stroke=\"#444\"/>\n";
      svg += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(bottom + 16) + "\" text-anchor=\"middle\">" + tick_label(t) +
             "</text>\n";
    }
    for (double t : ay.ticks()) {
      const double y = ay.map(t, bottom, top);
      svg += "<line x1=\"" + fmt(left - 4) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(left) + "\" y2=\"" + fmt(y) +
             "\" stroke=\"#444\"/>\n";
      svg += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\">" + tick_label(t) +
             "</text>\n";
    }
    svg += "<text class=\"x-label\" x=\"" + fmt((left + right) / 2) + "\" y=\"" + fmt(bottom + 36) +
           "\" text-anchor=\"middle\">" + escape(spec.x_label) + "</text>\n";
    svg += "<text class=\"y-label\" transform=\"translate(" + fmt(left - 52) + "," + fmt((top + bottom) / 2) +
           ") rotate(-90)\" text-anchor=\"middle\">" + escape(metric) + "</text>\n";

    for (std::size_t s = 0; s < pts.size(); ++s) {
      const auto& q = pts[s];
      const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
      if (q.band) {
        std::string poly;
        for (std::size_t r = 0; r < q.x.size(); ++r) {
          poly += fmt(ax.map(q.x[r], left, right)) + "," + fmt(ay.map(q.hi[r], bottom, top)) + " ";
        }
        for (std::size_t r = q.x.size(); r-- > 0;) {
          poly += fmt(ax.map(q.x[r], left, right)) + "," + fmt(ay.map(q.lo[r], bottom, top)) + " ";
        }
        svg += "<polygon points=\"" + poly + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      }
      std::string line;
      for (std::size_t r = 0; r < q.x.size(); ++r) {
        line += fmt(ax.map(q.x[r], left, right)) + "," + fmt(ay.map(q.mid[r], bottom, top)) + " ";
      }
      svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    }
    svg += "</g>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = h + margin_t + margin_b + 18.0 * static_cast<double>(s);
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    svg += "<rect x=\"" + fmt(margin_l) + "\" y=\"" + fmt(y - 9) + "\" width=\"12\" height=\"3\" fill=\"" + color +
           "\"/>\n";
    svg += "<text x=\"" + fmt(margin_l + 18) + "\" y=\"" + fmt(y - 4) + "\">" + escape(series[s].label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void emit_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec, const std::filesystem::path& path) {
  const std::string svg = render_plot_svg(series, spec);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_text_file_atomic(path, svg);
}

}  // namespace mirror_sinkhorn
