#include "topicdiv/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "topicdiv/csv.hpp"
#include "topicdiv/version.hpp"

namespace topicdiv::report {

namespace {

std::string fixed(double x, int decimals) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, x);
  return buf;
}

std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++w;  // count code points, not bytes
  }
  return w;
}

std::string pad_right(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return s + std::string(w >= width ? 0 : width - w, ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return std::string(w >= width ? 0 : width - w, ' ') + s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file: " + path.string());
  return out;
}

void write_coef_csv(const est::RegressionResult& result, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.field("name").field("estimate").field("cluster_se").field("stars");
  w.end_row();
  for (std::size_t i = 0; i < result.names.size(); ++i) {
    w.field(result.names[i])
        .field(result.coef[static_cast<Eigen::Index>(i)])
        .field(result.se[static_cast<Eigen::Index>(i)])
        .field(stars(result.pval[static_cast<Eigen::Index>(i)]));
    w.end_row();
  }
}

void write_coef_block(std::ostream& out, const est::RegressionResult& result,
                      std::size_t name_w, std::size_t num_w) {
  for (std::size_t i = 0; i < result.names.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out << pad_right(result.names[i], name_w)
        << pad_left(fixed(result.coef[idx], 4) + stars(result.pval[idx]), num_w) << "\n";
    out << pad_right("", name_w) << pad_left("(" + fixed(result.se[idx], 4) + ")", num_w)
        << "\n";
  }
}

void write_summary_block(std::ostream& out, const est::RegressionResult& result,
                         std::size_t name_w, std::size_t num_w) {
  for (const est::AbsorbedInfo& a : result.absorbed) {
    out << pad_right(a.name + " FE", name_w) << pad_left("YES", num_w) << "\n";
  }
  out << pad_right("Observations", name_w)
      << pad_left(std::to_string(result.n_obs), num_w) << "\n";
  out << pad_right("Clusters", name_w) << pad_left(std::to_string(result.n_clusters), num_w)
      << "\n";
  out << pad_right("Adjusted R2", name_w) << pad_left(fixed(result.adjusted_r2, 4), num_w)
      << "\n";
  if (!result.dropped_collinear.empty()) {
    out << "Dropped (collinear):";
    for (const std::string& d : result.dropped_collinear) out << " " << d;
    out << "\n";
  }
}

std::pair<std::size_t, std::size_t> table_widths(const est::RegressionResult& result) {
  std::size_t name_w = 16;
  for (const std::string& n : result.names) name_w = std::max(name_w, display_width(n) + 2);
  for (const est::AbsorbedInfo& a : result.absorbed) {
    name_w = std::max(name_w, display_width(a.name) + 5);
  }
  return {name_w, 14};
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string coord(double v) { return fixed(v, 2); }

struct LinearMap {
  double lo = 0.0;
  double hi = 1.0;
  double px_lo = 0.0;
  double px_hi = 1.0;
  double operator()(double v) const {
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

void svg_header(std::ostream& out, int width, int height) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<!-- topicdiv " << kVersion << " -->\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
}

void svg_line(std::ostream& out, double x1, double y1, double x2, double y2,
              const std::string& style) {
  out << "<line x1=\"" << coord(x1) << "\" y1=\"" << coord(y1) << "\" x2=\"" << coord(x2)
      << "\" y2=\"" << coord(y2) << "\" " << style << "/>\n";
}

void svg_text(std::ostream& out, double x, double y, const std::string& text,
              const std::string& attrs) {
  out << "<text x=\"" << coord(x) << "\" y=\"" << coord(y)
      << "\" font-family=\"sans-serif\" " << attrs << ">" << xml_escape(text) << "</text>\n";
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (raw <= mult * mag) {
      step = mult * mag;
      break;
    }
  }
  std::vector<double> ticks;
  const double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + 1e-12 * span; v += step) ticks.push_back(v);
  return ticks;
}

}  // namespace

std::string stars(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

void emit_table(const est::RegressionResult& result, TableStyle style,
                const std::filesystem::path& path, const std::string& title) {
  if (style == TableStyle::csv) {
    write_coef_csv(result, path);
    return;
  }
  std::ofstream out = open_out(path);
  const auto [name_w, num_w] = table_widths(result);
  const std::string rule(name_w + num_w, '-');
  out << title << "\n" << rule << "\n";
  write_coef_block(out, result, name_w, num_w);
  out << rule << "\n";
  write_summary_block(out, result, name_w, num_w);
  out << rule << "\n";
  out << "Stars: *** p<0.01, ** p<0.05, * p<0.10 (cluster-robust)\n";
}

void emit_iv_table(const est::TslsResult& result, TableStyle style,
                   const std::filesystem::path& path, const std::string& title) {
  if (style == TableStyle::csv) {
    // Second stage carries the structural estimates; first stage and the
    // diagnostics live in the text rendering.
    write_coef_csv(result.second_stage, path);
    return;
  }
  std::ofstream out = open_out(path);
  auto [name_w, num_w] = table_widths(result.second_stage);
  const auto [fs_name_w, fs_num_w] = table_widths(result.first_stage);
  name_w = std::max(name_w, fs_name_w);
  const std::size_t nw = std::max(num_w, fs_num_w);
  const std::string rule(name_w + nw, '-');

  out << title << "\n" << rule << "\n";
  out << "Second stage (outcome equation)\n";
  write_coef_block(out, result.second_stage, name_w, nw);
  out << rule << "\n";
  out << "First stage (" << result.endogenous << ")\n";
  write_coef_block(out, result.first_stage, name_w, nw);
  out << rule << "\n";
  write_summary_block(out, result.second_stage, name_w, nw);
  out << rule << "\n";
  out << pad_right("KP rk LM", name_w) << pad_left(fixed(result.kp.lm, 3), nw) << "\n";
  out << pad_right("  LM p-value", name_w) << pad_left(fixed(result.kp.lm_p, 4), nw) << "\n";
  out << pad_right("KP rk Wald F", name_w)
      << pad_left(std::isinf(result.kp.wald_f) ? "inf" : fixed(result.kp.wald_f, 3), nw)
      << "\n";
  out << pad_right("  10% critical value", name_w)
      << pad_left(fixed(result.stock_yogo_10pct, 2), nw) << "\n";
  out << pad_right("  Instrument strength", name_w)
      << pad_left(result.kp.wald_f > result.stock_yogo_10pct ? "strong" : "weak", nw) << "\n";
  if (result.weak_instrument_warning) {
    out << "WARNING: first-stage F below 1; instruments look irrelevant\n";
  }
  out << rule << "\n";
  out << "Stars: *** p<0.01, ** p<0.05, * p<0.10 (cluster-robust)\n";
}

void emit_boxplot_svg(std::span<const diversity::AnnualBoxStats> stats,
                      const std::filesystem::path& path, const std::string& metric_label) {
  if (stats.empty()) throw std::invalid_argument("emit_boxplot_svg: no box statistics");

  const int n = static_cast<int>(stats.size());
  const double ml = 62.0;
  const double mr = 18.0;
  const double mt = 22.0;
  const double mb = 46.0;
  const double slot = std::max(46.0, 560.0 / n);
  const int width = static_cast<int>(ml + mr + slot * n);
  const int height = 380;

  double lo = stats[0].whisker_lo;
  double hi = stats[0].whisker_hi;
  for (const auto& s : stats) {
    lo = std::min(lo, s.whisker_lo);
    hi = std::max(hi, s.whisker_hi);
    for (double o : s.outliers) {
      lo = std::min(lo, o);
      hi = std::max(hi, o);
    }
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  LinearMap ymap{lo - pad, hi + pad, static_cast<double>(height) - mb, mt};

  std::ofstream out = open_out(path);
  svg_header(out, width, height);

  svg_line(out, ml, mt, ml, height - mb, "stroke=\"black\" stroke-width=\"1\"");
  svg_line(out, ml, height - mb, width - mr, height - mb,
           "stroke=\"black\" stroke-width=\"1\"");
  for (double tick : nice_ticks(ymap.lo, ymap.hi, 6)) {
    const double y = ymap(tick);
    svg_line(out, ml - 4, y, ml, y, "stroke=\"black\" stroke-width=\"1\"");
    svg_text(out, ml - 7, y + 3.5, fixed(tick, 2),
             "font-size=\"10\" text-anchor=\"end\"");
  }
  svg_text(out, 14, (mt + height - mb) / 2.0, metric_label,
           "font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
               coord((mt + height - mb) / 2.0) + ")\"");
  svg_text(out, (ml + width - mr) / 2.0, height - 10, "year",
           "font-size=\"11\" text-anchor=\"middle\"");

  const double half = std::min(16.0, slot * 0.30);
  for (int i = 0; i < n; ++i) {
    const auto& s = stats[static_cast<std::size_t>(i)];
    const double cx = ml + slot * (i + 0.5);
    const std::string stroke = "stroke=\"black\" stroke-width=\"1\"";
    svg_line(out, cx, ymap(s.whisker_lo), cx, ymap(s.q1), stroke);
    svg_line(out, cx, ymap(s.q3), cx, ymap(s.whisker_hi), stroke);
    svg_line(out, cx - half * 0.6, ymap(s.whisker_lo), cx + half * 0.6, ymap(s.whisker_lo),
             stroke);
    svg_line(out, cx - half * 0.6, ymap(s.whisker_hi), cx + half * 0.6, ymap(s.whisker_hi),
             stroke);
    out << "<rect x=\"" << coord(cx - half) << "\" y=\"" << coord(ymap(s.q3)) << "\" width=\""
        << coord(2 * half) << "\" height=\"" << coord(ymap(s.q1) - ymap(s.q3))
        << "\" fill=\"#9ecae1\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg_line(out, cx - half, ymap(s.median), cx + half, ymap(s.median),
             "stroke=\"black\" stroke-width=\"1.6\"");
    for (double o : s.outliers) {
      out << "<circle cx=\"" << coord(cx) << "\" cy=\"" << coord(ymap(o))
          << "\" r=\"2.2\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>\n";
    }
    svg_text(out, cx, height - mb + 14, std::to_string(s.year),
             "font-size=\"10\" text-anchor=\"middle\"");
  }
  out << "</svg>\n";
}

void emit_density_svg(const est::PlaceboDistribution& dist,
                      const std::filesystem::path& path, const std::string& title) {
  if (dist.coefficients.empty()) {
    throw std::invalid_argument("emit_density_svg: no successful placebo repetitions");
  }
  if (dist.kde.x.size() == 0) {
    throw std::invalid_argument("emit_density_svg: degenerate placebo distribution");
  }

  const int width = 640;
  const int height = 400;
  const double ml = 56.0;
  const double mr = 56.0;
  const double mt = 30.0;
  const double mb = 44.0;

  double xlo = dist.kde.x[0];
  double xhi = dist.kde.x[dist.kde.x.size() - 1];
  xlo = std::min(xlo, dist.baseline_coef);
  xhi = std::max(xhi, dist.baseline_coef);
  const double xpad = 0.04 * (xhi - xlo);
  LinearMap xmap{xlo - xpad, xhi + xpad, ml, width - mr};

  double dmax = 0.0;
  for (Eigen::Index i = 0; i < dist.kde.density.size(); ++i) {
    dmax = std::max(dmax, dist.kde.density[i]);
  }
  LinearMap dmap{0.0, dmax * 1.06, static_cast<double>(height) - mb, mt};
  LinearMap pmap{0.0, 1.0, static_cast<double>(height) - mb, mt};

  std::ofstream out = open_out(path);
  svg_header(out, width, height);
  svg_text(out, width / 2.0, 18, title, "font-size=\"12\" text-anchor=\"middle\"");

  svg_line(out, ml, mt, ml, height - mb, "stroke=\"black\" stroke-width=\"1\"");
  svg_line(out, width - mr, mt, width - mr, height - mb, "stroke=\"black\" stroke-width=\"1\"");
  svg_line(out, ml, height - mb, width - mr, height - mb, "stroke=\"black\" stroke-width=\"1\"");

  for (double tick : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const double y = pmap(tick);
    svg_line(out, ml - 4, y, ml, y, "stroke=\"black\" stroke-width=\"1\"");
    svg_text(out, ml - 7, y + 3.5, fixed(tick, 1), "font-size=\"10\" text-anchor=\"end\"");
  }
  for (double tick : nice_ticks(dmap.lo, dmap.hi, 5)) {
    const double y = dmap(tick);
    svg_line(out, width - mr, y, width - mr + 4, y, "stroke=\"black\" stroke-width=\"1\"");
    svg_text(out, width - mr + 7, y + 3.5, fixed(tick, 1),
             "font-size=\"10\" text-anchor=\"start\"");
  }
  for (double tick : nice_ticks(xmap.lo, xmap.hi, 6)) {
    const double x = xmap(tick);
    svg_line(out, x, height - mb, x, height - mb + 4, "stroke=\"black\" stroke-width=\"1\"");
    svg_text(out, x, height - mb + 16, fixed(tick, 3),
             "font-size=\"10\" text-anchor=\"middle\"");
  }
  svg_text(out, 14, (mt + height - mb) / 2.0, "placebo p-value",
           "font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
               coord((mt + height - mb) / 2.0) + ")\"");
  svg_text(out, width - 12, (mt + height - mb) / 2.0, "density",
           "font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(90 " +
               coord(width - 12) + " " + coord((mt + height - mb) / 2.0) + ")\"");
  svg_text(out, (ml + width - mr) / 2.0, height - 8, "placebo coefficient",
           "font-size=\"11\" text-anchor=\"middle\"");

  // KDE curve against the right-hand density axis.
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.6\" points=\"";
  for (Eigen::Index i = 0; i < dist.kde.x.size(); ++i) {
    if (i) out << ' ';
    out << coord(xmap(dist.kde.x[i])) << ',' << coord(dmap(dist.kde.density[i]));
  }
  out << "\"/>\n";

  for (std::size_t i = 0; i < dist.coefficients.size(); ++i) {
    out << "<circle cx=\"" << coord(xmap(dist.coefficients[i])) << "\" cy=\""
        << coord(pmap(dist.p_values[i]))
        << "\" r=\"1.6\" fill=\"#555555\" fill-opacity=\"0.55\"/>\n";
  }

  svg_line(out, xmap(dist.baseline_coef), mt, xmap(dist.baseline_coef), height - mb,
           "stroke=\"#d62728\" stroke-width=\"1.6\"");
  svg_line(out, ml, pmap(0.10), width - mr, pmap(0.10),
           "stroke=\"#444444\" stroke-width=\"1\" stroke-dasharray=\"5,4\"");
  svg_text(out, xmap(dist.baseline_coef), mt - 6, "baseline",
           "font-size=\"10\" text-anchor=\"middle\" fill=\"#d62728\"");
  svg_text(out, width - mr - 4, pmap(0.10) - 4, "p=0.10",
           "font-size=\"10\" text-anchor=\"end\"");

  out << "</svg>\n";
}

}  // namespace topicdiv::report
