#include "warmopf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace warmopf::svg {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v, bool log) {
  char buf[32];
  if (log) {
    std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  }
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  } else if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string open(const Axes& a) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(a.title) +
         "</text>\n";
}

std::string axes_markup(const Axes& a, const Frame& f, bool x_ticks) {
  std::string s;
  const double bx = kLeft, by = kHeight - kBottom, ex = kWidth - kRight, ty = kTop;
  s += "<line x1=\"" + num(bx) + "\" y1=\"" + num(by) + "\" x2=\"" + num(ex) + "\" y2=\"" + num(by) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(bx) + "\" y1=\"" + num(by) + "\" x2=\"" + num(bx) + "\" y2=\"" + num(ty) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double y = f.py(v);
    s += "<line x1=\"" + num(bx - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(bx) + "\" y2=\"" + num(y) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(bx - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + escape(tick_label(v, a.log_y)) +
         "</text>\n";
  }
  if (x_ticks) {
    for (int i = 0; i <= 4; ++i) {
      const double v = f.x0 + (f.x1 - f.x0) * i / 4.0;
      const double x = f.px(v);
      s += "<line x1=\"" + num(x) + "\" y1=\"" + num(by) + "\" x2=\"" + num(x) + "\" y2=\"" + num(by + 4) + "\" stroke=\"black\"/>\n";
      s += "<text x=\"" + num(x) + "\" y=\"" + num(by + 18) + "\" text-anchor=\"middle\">" + escape(tick_label(v, false)) +
           "</text>\n";
    }
  }
  s += "<text x=\"" + num((bx + ex) / 2) + "\" y=\"" + num(kHeight - 15) + "\" text-anchor=\"middle\">" + escape(a.x_label) +
       "</text>\n";
  s += "<text transform=\"translate(18," + num((by + ty) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(a.y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

const std::string& palette(std::size_t i) {
  static const std::vector<std::string> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[i % colors.size()];
}

std::string line_chart(const Axes& a, const std::vector<Series>& series) {
  auto tr = [&](double y) { return a.log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!a.log_y || y > 0.0); };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, tr(s.y[i]));
      y1 = std::max(y1, tr(s.y[i]));
    }
  }
  widen(x0, x1);
  widen(y0, y1);
  if (a.log_y) {
    y0 = std::floor(y0);
    y1 = std::ceil(y1);
    if (y1 == y0) y1 += 1;
  }
  const Frame f{x0, x1, y0, y1};
  std::string s = open(a) + axes_markup(a, f, true);
  std::vector<std::pair<std::string, std::string>> legend;
  for (const Series& ser : series) {
    std::string pts;
    for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
      if (!usable(ser.x[i], ser.y[i])) continue;
      pts += num(f.px(ser.x[i])) + "," + num(f.py(tr(ser.y[i]))) + " ";
    }
    if (!pts.empty()) {
      s += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    }
    if (!ser.label.empty() && std::none_of(legend.begin(), legend.end(), [&](const auto& l) { return l.first == ser.label; })) {
      legend.emplace_back(ser.label, ser.color);
    }
  }
  for (std::size_t i = 0; i < legend.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    const double x = kWidth - kRight + 12;
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x + 20) + "\" y2=\"" + num(y) + "\" stroke=\"" +
         legend[i].second + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(x + 26) + "\" y=\"" + num(y + 4) + "\">" + escape(legend[i].first) + "</text>\n";
  }
  return s + "</svg>\n";
}

std::string bar_chart(const Axes& a, const std::vector<std::string>& labels, const std::vector<double>& values) {
  double y1 = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) y1 = std::max(y1, v);
  }
  if (y1 <= 0.0) y1 = 1.0;
  const std::size_t n = std::max<std::size_t>(values.size(), 1);
  const Frame f{0.0, static_cast<double>(n), 0.0, y1 * 1.05};
  std::string s = open(a) + axes_markup(a, f, false);
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(n);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? values[i] : 0.0;
    const double x = f.px(static_cast<double>(i)) + slot * 0.1;
    const double top = f.py(v);
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(top) + "\" width=\"" + num(slot * 0.8) + "\" height=\"" +
         num(f.py(0.0) - top) + "\" fill=\"" + palette(0) + "\"/>\n";
    if (i < labels.size() && (n <= 40 || i % (n / 20 + 1) == 0)) {
      const double cx = x + slot * 0.4;
      s += "<text transform=\"translate(" + num(cx) + "," + num(kHeight - kBottom + 12) +
           ") rotate(60)\" font-size=\"9\">" + escape(labels[i]) + "</text>\n";
    }
  }
  return s + "</svg>\n";
}

}  // namespace warmopf::svg
