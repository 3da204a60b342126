#include "radis/util/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace radis::svg {
namespace {

constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<BarSeries>& series) {
  const double w = 80 + 40.0 * std::max<size_t>(categories.size(), 1) * std::max<size_t>(series.size(), 1);
  const double h = 320, top = 40, bottom = 260, left = 60, right = w - 20;
  double lo = -1.0, hi = 1.0;
  for (const auto& s : series) {
    for (const auto& v : s.values) {
      if (v) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
  }
  auto y_of = [&](double v) { return top + (hi - v) / (hi - lo) * (bottom - top); };
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\">\n"
      "<text x=\"{:.1f}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
      w, h, w / 2, escape(title));
  out += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\"/>\n",
                     left, y_of(0), right, y_of(0));
  for (double t : {lo, 0.0, hi}) {
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">{:.2f}</text>\n",
                       left - 4, y_of(t) + 3, t);
  }
  const double group = (right - left) / std::max<size_t>(categories.size(), 1);
  const double bar = group * 0.8 / std::max<size_t>(series.size(), 1);
  for (size_t c = 0; c < categories.size(); ++c) {
    const double gx = left + c * group + group * 0.1;
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                       gx + group * 0.4, bottom + 14, escape(categories[c]));
    for (size_t s = 0; s < series.size(); ++s) {
      if (c >= series[s].values.size() || !series[s].values[c]) continue;
      const double v = *series[s].values[c];
      const double y0 = y_of(std::max(v, 0.0)), y1 = y_of(std::min(v, 0.0));
      out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n",
                         gx + s * bar, y0, bar, y1 - y0, kPalette[s % 6]);
    }
  }
  for (size_t s = 0; s < series.size(); ++s) {
    const double ly = bottom + 30 + 14.0 * s;
    out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", left,
                       ly - 9, kPalette[s % 6]);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n", left + 14, ly,
                       escape(series[s].name));
  }
  return out + "</svg>\n";
}

std::string scatter(const std::string& title, const std::string& x_label, const std::string& y_label,
                    const std::vector<Point>& points) {
  const double w = 480, h = 400, left = 60, right = 440, top = 40, bottom = 340;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  for (const auto& p : points) {
    x0 = std::min({x0, p.x_lo, p.x});
    x1 = std::max({x1, p.x_hi, p.x});
    y0 = std::min({y0, p.y_lo, p.y});
    y1 = std::max({y1, p.y_hi, p.y});
  }
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (right - left); };
  auto py = [&](double y) { return bottom - (y - y0) / (y1 - y0) * (bottom - top); };
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\">\n"
      "<text x=\"{:.1f}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
      w, h, w / 2, escape(title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                     left, top, right - left, bottom - top);
  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                     (left + right) / 2, bottom + 30, escape(x_label));
  out += fmt::format(
      "<text x=\"15\" y=\"{:.1f}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.1f})\">{}</text>\n",
      (top + bottom) / 2, (top + bottom) / 2, escape(y_label));
  for (double t : {x0, x1}) {
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"middle\">{:.2f}</text>\n",
                       px(t), bottom + 14, t);
  }
  for (double t : {y0, y1}) {
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">{:.1f}</text>\n",
                       left - 4, py(t) + 3, t);
  }
  for (size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const char* color = kPalette[i % 6];
    out += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"{}\"/>\n",
                       px(p.x_lo), py(p.y), px(p.x_hi), py(p.y), color);
    out += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"{}\"/>\n",
                       px(p.x), py(p.y_lo), px(p.x), py(p.y_hi), color);
    out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"5\" fill=\"{}\"/>\n", px(p.x), py(p.y), color);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n", px(p.x) + 7,
                       py(p.y) - 7, escape(p.label));
  }
  return out + "</svg>\n";
}

}  // namespace radis::svg
