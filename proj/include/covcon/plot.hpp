#pragma once

// Hand-emitted SVG: log10-log10 scatter of mean deviation against n/N, the
// fitted line per family and the slope-1/2 bound envelope.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "covcon/bounds.hpp"
#include "covcon/error.hpp"
#include "covcon/experiments.hpp"

namespace covcon {

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string beta_label(double beta) {
  const double inv = 1.0 / beta;
  char buf[32];
  if (std::abs(inv - std::round(inv)) < 1e-9 * inv)
    std::snprintf(buf, sizeof buf, "1/%.0f", std::round(inv));
  else
    std::snprintf(buf, sizeof buf, "%.3g", beta);
  return buf;
}

}  // namespace detail

inline std::string render_plot(const std::vector<CellResult>& results, const BoundConfig& cfg) {
  using detail::fmt2;
  std::vector<const CellResult*> cells;
  for (const auto& r : results)
    if (r.cell.n <= r.cell.N && r.summary.mean_deviation > 0.0) cells.push_back(&r);
  if (cells.empty()) throw ValidationError("plot: no n <= N results to plot");

  constexpr double W = 800, H = 600, left = 90, right = 30, top = 40, bottom = 80;
  double bmin = 1e300, bmax = -1e300, dmin = 1e300, dmax = -1e300;
  const double s = cfg.psi + cfg.K;
  auto envelope = [&](double beta) { return cfg.C_main * s * s * std::sqrt(beta); };
  for (const auto* r : cells) {
    bmin = std::min(bmin, r->cell.beta());
    bmax = std::max(bmax, r->cell.beta());
    dmin = std::min(dmin, r->summary.mean_deviation);
    dmax = std::max(dmax, r->summary.mean_deviation);
  }
  dmin = std::min(dmin, envelope(bmin));
  dmax = std::max(dmax, envelope(bmax));
  const double x0 = std::log10(bmin) - 0.1, x1 = std::log10(bmax) + 0.1;
  const double y0 = std::floor(std::log10(dmin) * 4.0) / 4.0 - 0.05;
  const double y1 = std::ceil(std::log10(dmax) * 4.0) / 4.0 + 0.05;
  auto px = [&](double beta) { return left + (std::log10(beta) - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double dev) { return H - bottom - (std::log10(dev) - y0) / (y1 - y0) * (H - top - bottom); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  svg += "<line class=\"axis\" x1=\"" + fmt2(left) + "\" y1=\"" + fmt2(H - bottom) + "\" x2=\"" +
         fmt2(W - right) + "\" y2=\"" + fmt2(H - bottom) + "\" stroke=\"black\"/>\n";
  svg += "<line class=\"axis\" x1=\"" + fmt2(left) + "\" y1=\"" + fmt2(top) + "\" x2=\"" + fmt2(left) +
         "\" y2=\"" + fmt2(H - bottom) + "\" stroke=\"black\"/>\n";

  std::vector<double> betas;
  for (const auto* r : cells) betas.push_back(r->cell.beta());
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());
  for (double b : betas) {
    svg += "<text class=\"beta-tick\" x=\"" + fmt2(px(b)) + "\" y=\"" + fmt2(H - bottom + 18) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + detail::beta_label(b) + "</text>\n";
  }
  for (double e = std::ceil(y0 * 4.0) / 4.0; e <= y1; e += 0.25) {
    svg += "<text class=\"dev-tick\" x=\"" + fmt2(left - 8) + "\" y=\"" + fmt2(py(std::pow(10.0, e)) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + fmt2(std::pow(10.0, e)) + "</text>\n";
  }
  svg += "<text x=\"" + fmt2((W + left - right) / 2) + "\" y=\"" + fmt2(H - 30) +
         "\" font-size=\"13\" text-anchor=\"middle\">beta = n/N (log scale)</text>\n";
  svg += "<text x=\"20\" y=\"" + fmt2((H - bottom + top) / 2) + "\" font-size=\"13\" transform=\"rotate(-90 20 " +
         fmt2((H - bottom + top) / 2) + ")\" text-anchor=\"middle\">mean ||AA^T/N - I|| (log scale)</text>\n";

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::map<std::string, std::vector<const CellResult*>> by_family;
  for (const auto* r : cells) by_family[family_name(r->cell.family)].push_back(r);
  std::size_t k = 0;
  for (const auto& [name, group] : by_family) {
    const char* color = colors[k++ % 6];
    for (const auto* r : group)
      svg += "<circle class=\"cell\" data-family=\"" + name + "\" cx=\"" + fmt2(px(r->cell.beta())) +
             "\" cy=\"" + fmt2(py(r->summary.mean_deviation)) + "\" r=\"4\" fill=\"" + color + "\"/>\n";
    std::vector<double> bs, ys;
    for (const auto* r : group) {
      bs.push_back(r->cell.beta());
      ys.push_back(r->summary.mean_deviation);
    }
    std::vector<double> distinct(bs);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() >= 3) {
      const ScalingFit fit = fit_log_linear(bs, ys);
      auto at = [&](double b) { return std::exp(fit.log_constant + fit.exponent * std::log(b)); };
      svg += "<line class=\"fit\" data-family=\"" + name + "\" x1=\"" + fmt2(px(bmin)) + "\" y1=\"" +
             fmt2(py(at(bmin))) + "\" x2=\"" + fmt2(px(bmax)) + "\" y2=\"" + fmt2(py(at(bmax))) +
             "\" stroke=\"" + color + "\" stroke-dasharray=\"6 3\"/>\n";
      svg += "<text class=\"legend\" x=\"" + fmt2(left + 10) + "\" y=\"" + fmt2(top + 16.0 * static_cast<double>(k)) +
             "\" font-size=\"12\" fill=\"" + color + "\">" + name + ": slope " + fmt2(fit.exponent) + "</text>\n";
    }
  }

  std::string points;
  constexpr int samples = 32;
  for (int i = 0; i <= samples; ++i) {
    const double lb = std::log10(bmin) + (std::log10(bmax) - std::log10(bmin)) * i / samples;
    const double b = std::pow(10.0, lb);
    if (i) points += ' ';
    points += fmt2(px(b)) + "," + fmt2(py(envelope(b)));
  }
  svg += "<polyline class=\"reference\" points=\"" + points + "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text class=\"legend\" x=\"" + fmt2(W - right - 10) + "\" y=\"" + fmt2(top + 16) +
         "\" font-size=\"12\" text-anchor=\"end\">C(psi+K)^2 sqrt(n/N)</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace covcon
