#pragma once

// Self-contained SVG figures: LL vs delta-ND scatter, odds-ratio forest and
// stacked preference bars.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lexshift/annot.hpp"
#include "lexshift/cli/report.hpp"
#include "lexshift/common/error.hpp"

namespace lexshift::cli::plot {

/// Affine map from data coordinates to pixels.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double px_lo = 0.0;
  double px_hi = 1.0;

  double map(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

inline constexpr double kWidth = 640, kHeight = 480;
inline constexpr double kLeft = 70, kRight = 20, kTop = 30, kBottom = 50;

inline constexpr std::string_view kGray = "#a6a6a6";
inline constexpr std::string_view kDarkBlue = "#08306b";
inline constexpr std::string_view kLightBlue = "#6baed6";
inline constexpr std::string_view kOrange = "#ff7f0e";
inline constexpr std::string_view kBlue = "#1f77b4";

namespace detail {

inline std::string f2(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", v);
  return b;
}

inline std::string tick_label(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return b;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20 && c != '\t' && c != '\n') break;
        out += c;
    }
  }
  return out;
}

/// Data range padded by 5% on each side; a degenerate range widens to +-1.
inline std::pair<double, double> padded(double lo, double hi) {
  if (!(hi > lo)) return {lo - 1.0, hi + 1.0};
  double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

inline std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(w) +
         "\" height=\"" + f2(h) + "\" viewBox=\"0 0 " + f2(w) + " " + f2(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect x=\"0\" y=\"0\" width=\"" + f2(w) + "\" height=\"" +
         f2(h) + "\" fill=\"white\"/>\n";
}

inline std::string line(double x1, double y1, double x2, double y2, std::string_view attrs) {
  return "<line x1=\"" + f2(x1) + "\" y1=\"" + f2(y1) + "\" x2=\"" + f2(x2) + "\" y2=\"" + f2(y2) + "\" " +
         std::string(attrs) + "/>\n";
}

inline std::string text_el(double x, double y, std::string_view s, std::string_view attrs = "") {
  return "<text x=\"" + f2(x) + "\" y=\"" + f2(y) + "\"" + (attrs.empty() ? "" : " " + std::string(attrs)) + ">" +
         escape(s) + "</text>\n";
}

/// Axis lines, 5 ticks per axis and titles. `xticks` overrides the x tick
/// values (data coordinates) and labels.
inline std::string axes(const Axis& x, const Axis& y, std::string_view xtitle, std::string_view ytitle,
                        const std::vector<std::pair<double, std::string>>* xticks = nullptr) {
  std::string out = "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  out += line(x.px_lo, y.px_lo, x.px_hi, y.px_lo, "class=\"x-axis\"");
  out += line(x.px_lo, y.px_lo, x.px_lo, y.px_hi, "class=\"y-axis\"");
  out += "</g>\n<g class=\"ticks\">\n";
  std::vector<std::pair<double, std::string>> xt;
  if (xticks)
    xt = *xticks;
  else
    for (int i = 0; i <= 4; ++i) {
      double v = x.lo + (x.hi - x.lo) * i / 4.0;
      xt.emplace_back(v, tick_label(v));
    }
  for (const auto& [v, label] : xt) {
    double px = x.map(v);
    out += line(px, y.px_lo, px, y.px_lo + 4, "stroke=\"black\"");
    out += text_el(px, y.px_lo + 16, label, "text-anchor=\"middle\"");
  }
  if (y.hi > y.lo)
    for (int i = 0; i <= 4; ++i) {
      double v = y.lo + (y.hi - y.lo) * i / 4.0;
      double py = y.map(v);
      out += line(x.px_lo - 4, py, x.px_lo, py, "stroke=\"black\"");
      out += text_el(x.px_lo - 6, py + 4, tick_label(v), "text-anchor=\"end\"");
    }
  out += "</g>\n";
  out += text_el((x.px_lo + x.px_hi) / 2, kHeight - 10, xtitle, "text-anchor=\"middle\" class=\"x-title\"");
  out += text_el(14, (y.px_lo + y.px_hi) / 2, ytitle,
                 "text-anchor=\"middle\" class=\"y-title\" transform=\"rotate(-90 14 " + f2((y.px_lo + y.px_hi) / 2) +
                     ")\"");
  return out;
}

}  // namespace detail

// LL vs delta-ND scatter.

struct ScatterPoint {
  std::string label;
  double signed_ll = 0.0;
  double delta_nd = 0.0;
  double p_value = 1.0;
  bool overlap = false;
};

/// Gray when the ND change is not significant, dark blue for contrast
/// overlap, light blue otherwise.
inline std::string_view marker_color(const ScatterPoint& p, double alpha = 0.05) {
  if (!(p.p_value < alpha)) return kGray;
  return p.overlap ? kDarkBlue : kLightBlue;
}

inline std::vector<ScatterPoint> scatter_points(const std::vector<report::ShiftRow>& rows) {
  std::vector<ScatterPoint> out;
  for (const auto& r : rows) {
    const auto& s = r.record;
    if (!s.delta_nd) continue;
    if (!s.p_value) throw Error(Errc::SchemaMismatch, "record " + s.key + " has delta ND but no p value");
    out.push_back({s.unit(), s.signed_ll, *s.delta_nd, *s.p_value, s.overlap_llm});
  }
  return out;
}

inline std::pair<Axis, Axis> scatter_axes(const std::vector<ScatterPoint>& pts) {
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
  if (!pts.empty()) {
    xlo = xhi = pts[0].signed_ll;
    ylo = yhi = pts[0].delta_nd;
    for (const auto& p : pts) {
      xlo = std::min(xlo, p.signed_ll);
      xhi = std::max(xhi, p.signed_ll);
      ylo = std::min(ylo, p.delta_nd);
      yhi = std::max(yhi, p.delta_nd);
    }
  }
  auto [x0, x1] = detail::padded(xlo, xhi);
  auto [y0, y1] = detail::padded(ylo, yhi);
  return {Axis{x0, x1, kLeft, kWidth - kRight}, Axis{y0, y1, kHeight - kBottom, kTop}};
}

inline std::string scatter_ll_nd(const std::vector<ScatterPoint>& pts, double alpha = 0.05) {
  for (const auto& p : pts)
    if (!std::isfinite(p.signed_ll) || !std::isfinite(p.delta_nd))
      throw Error(Errc::SchemaMismatch, "scatter point " + p.label + " is not finite");
  auto [x, y] = scatter_axes(pts);
  std::string out = detail::header(kWidth, kHeight);
  out += detail::axes(x, y, "signed log-likelihood", "ΔND");
  if (x.lo < 0 && x.hi > 0)
    out += detail::line(x.map(0), y.px_lo, x.map(0), y.px_hi, "class=\"zero\" stroke=\"#cccccc\" stroke-dasharray=\"2,2\"");
  if (y.lo < 0 && y.hi > 0)
    out += detail::line(x.px_lo, y.map(0), x.px_hi, y.map(0), "class=\"zero\" stroke=\"#cccccc\" stroke-dasharray=\"2,2\"");
  out += "<g class=\"markers\">\n";
  for (const auto& p : pts) {
    double cx = x.map(p.signed_ll), cy = y.map(p.delta_nd);
    auto color = marker_color(p, alpha);
    std::string cls = color == kGray ? "marker nonsig" : p.overlap ? "marker overlap" : "marker sig";
    out += "<circle class=\"" + cls + "\" cx=\"" + detail::f2(cx) + "\" cy=\"" + detail::f2(cy) + "\" r=\"4\" fill=\"" +
           std::string(color) + "\"><title>" + detail::escape(p.label) + "</title></circle>\n";
    out += detail::text_el(cx + 6, cy - 6, p.label, "class=\"label\" font-size=\"9\"");
  }
  out += "</g>\n</svg>\n";
  return out;
}

// Odds-ratio forest.

struct ForestLayout {
  Axis x;  // over log(odds ratio)
  std::vector<std::string> rows;  // "group/name" in drawing order
  double row_height = 18;
  double top = kTop;
};

inline ForestLayout forest_layout(const std::vector<report::ForestRecord>& recs) {
  ForestLayout L;
  std::map<std::pair<std::string, std::string>, int> seen;
  std::vector<std::pair<std::string, std::string>> keys;
  double lo = 0.0, hi = 0.0;  // log(1) always in range
  for (const auto& r : recs) {
    if (!(r.odds_ratio > 0) || !(r.ci_lo > 0) || !(r.ci_hi > 0) || !std::isfinite(r.odds_ratio) ||
        !std::isfinite(r.ci_lo) || !std::isfinite(r.ci_hi))
      throw Error(Errc::SchemaMismatch, "odds ratio record " + r.name + " is not positive and finite");
    if (r.ci_lo > r.ci_hi) throw Error(Errc::SchemaMismatch, "odds ratio record " + r.name + " has ci_lo > ci_hi");
    if (seen.emplace(std::pair{r.group, r.name}, 0).second) keys.emplace_back(r.group, r.name);
    lo = std::min({lo, std::log(r.ci_lo), std::log(r.odds_ratio)});
    hi = std::max({hi, std::log(r.ci_hi), std::log(r.odds_ratio)});
  }
  std::sort(keys.begin(), keys.end());
  for (const auto& [g, n] : keys) L.rows.push_back(g + "/" + n);
  auto [a, b] = detail::padded(lo, hi);
  L.x = Axis{a, b, 200, kWidth - kRight};
  return L;
}

inline std::string odds_forest(const std::vector<report::ForestRecord>& recs) {
  auto L = forest_layout(recs);
  const double height = std::max(kHeight, L.top + L.row_height * static_cast<double>(L.rows.size() + 1) + kBottom);
  const double y_bottom = height - kBottom;
  std::string out = detail::header(kWidth, height);

  // Ticks at round odds ratios inside the range.
  std::vector<std::pair<double, std::string>> ticks;
  for (double v : {0.1, 0.2, 0.5, 0.8, 1.0, 1.25, 2.0, 5.0, 10.0})
    if (std::log(v) >= L.x.lo && std::log(v) <= L.x.hi) ticks.emplace_back(std::log(v), detail::tick_label(v));
  Axis yax{0, 0, y_bottom, L.top};
  out += detail::axes(L.x, yax, "odds ratio", "", &ticks);
  out += detail::line(L.x.map(0.0), y_bottom, L.x.map(0.0), L.top,
                      "class=\"reference\" stroke=\"black\" stroke-dasharray=\"4,3\"");

  std::vector<std::string> datasets;
  for (const auto& r : recs)
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
  auto color = [&](const std::string& d) {
    auto i = std::find(datasets.begin(), datasets.end(), d) - datasets.begin();
    return i == 0 ? kBlue : kOrange;
  };
  auto row_y = [&](const report::ForestRecord& r) {
    auto it = std::find(L.rows.begin(), L.rows.end(), r.group + "/" + r.name);
    return L.top + L.row_height * (static_cast<double>(it - L.rows.begin()) + 1.0);
  };
  out += "<g class=\"rows\">\n";
  for (std::size_t i = 0; i < L.rows.size(); ++i) {
    auto slash = L.rows[i].find('/');
    std::string label = L.rows[i].substr(slash + 1) + " (" + L.rows[i].substr(0, slash) + ")";
    out += detail::text_el(L.x.px_lo - 8, L.top + L.row_height * (static_cast<double>(i) + 1.0) + 4, label,
                           "text-anchor=\"end\"");
  }
  out += "</g>\n<g class=\"markers\">\n";
  for (const auto& r : recs) {
    auto di = std::find(datasets.begin(), datasets.end(), r.dataset) - datasets.begin();
    double offset = datasets.size() > 1 ? (di == 0 ? -3.0 : 3.0) : 0.0;
    double cy = row_y(r) + offset;
    auto c = std::string(color(r.dataset));
    out += detail::line(L.x.map(std::log(r.ci_lo)), cy, L.x.map(std::log(r.ci_hi)), cy,
                        "class=\"ci\" stroke=\"" + c + "\" stroke-width=\"1.5\"");
    out += "<circle class=\"marker\" cx=\"" + detail::f2(L.x.map(std::log(r.odds_ratio))) + "\" cy=\"" + detail::f2(cy) +
           "\" r=\"3.5\" fill=\"" + c + "\"><title>" + detail::escape(r.name + " " + r.dataset) + "</title></circle>\n";
  }
  out += "</g>\n<g class=\"legend\">\n";
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    double ly = 14 + 14 * static_cast<double>(i);
    out += "<rect x=\"" + detail::f2(kWidth - 150) + "\" y=\"" + detail::f2(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
           std::string(color(datasets[i])) + "\"/>\n";
    out += detail::text_el(kWidth - 135, ly + 1, datasets[i]);
  }
  out += "</g>\n</svg>\n";
  return out;
}

// Stacked preference bars.

inline constexpr std::string_view kPreferenceColors[4] = {"#08519c", "#6baed6", "#fc9272", "#cb181d"};
inline constexpr std::string_view kPreferenceNames[4] = {"strongly human", "slightly human", "slightly LLM",
                                                         "strongly LLM"};

inline std::string preference_stack(const std::vector<annot::PreferenceCounts>& rows) {
  Axis x{0.0, 100.0, 120, kWidth - kRight};
  Axis y{0, 0, kHeight - kBottom, kTop + 30};
  std::string out = detail::header(kWidth, kHeight);
  out += detail::axes(x, y, "share of ratings (%)", "");
  const double band = rows.empty() ? 0.0 : (y.px_lo - y.px_hi) / static_cast<double>(rows.size());
  out += "<g class=\"bars\">\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    double top = y.px_hi + band * static_cast<double>(i) + band * 0.15;
    double h = band * 0.7;
    out += detail::text_el(x.px_lo - 8, top + h / 2 + 4, r.dimension, "text-anchor=\"end\"");
    double acc = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      double share = 100.0 * r.share(k);
      double x0 = x.map(acc), x1 = x.map(acc + share);
      out += "<rect class=\"segment\" x=\"" + detail::f2(x0) + "\" y=\"" + detail::f2(top) + "\" width=\"" +
             detail::f2(x1 - x0) + "\" height=\"" + detail::f2(h) + "\" fill=\"" + std::string(kPreferenceColors[k]) +
             "\"><title>" + detail::escape(r.dimension + " " + std::string(kPreferenceNames[k]) + " " +
                                           std::to_string(r.counts[k])) +
             "</title></rect>\n";
      acc += share;
    }
  }
  out += "</g>\n<g class=\"legend\">\n";
  for (std::size_t k = 0; k < 4; ++k) {
    double lx = x.px_lo + 120 * static_cast<double>(k);
    out += "<rect x=\"" + detail::f2(lx) + "\" y=\"" + detail::f2(kTop - 10) + "\" width=\"10\" height=\"10\" fill=\"" +
           std::string(kPreferenceColors[k]) + "\"/>\n";
    out += detail::text_el(lx + 14, kTop, kPreferenceNames[k]);
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace lexshift::cli::plot
