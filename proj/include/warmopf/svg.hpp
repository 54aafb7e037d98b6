#pragma once

#include <string>
#include <vector>

namespace warmopf::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

/// Line chart; non-finite points (and non-positive ones on a log axis) are skipped.
std::string line_chart(const Axes& axes, const std::vector<Series>& series);
std::string bar_chart(const Axes& axes, const std::vector<std::string>& labels, const std::vector<double>& values);

std::string escape(const std::string& text);
const std::string& palette(std::size_t i);

}  // namespace warmopf::svg
