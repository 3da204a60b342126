#pragma once

#include <optional>
#include <string>
#include <vector>

namespace radis::svg {

struct BarSeries {
  std::string name;
  std::vector<std::optional<double>> values;  // nullopt draws nothing
};

// Grouped bars per category with a zero line; y range [-1, 1] unless
// values exceed it.
std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<BarSeries>& series);

struct Point {
  double x = 0.0, y = 0.0;
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;  // error bars
  std::string label;
};

std::string scatter(const std::string& title, const std::string& x_label, const std::string& y_label,
                    const std::vector<Point>& points);

}  // namespace radis::svg
