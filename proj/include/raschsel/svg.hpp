#pragma once

// Minimal SVG output: line charts and dendrograms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "raschsel/hierarchy.hpp"

namespace raschsel {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* palette(std::size_t k) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return colors[k % 8];
}

struct Frame {
  double x0, x1, y0, y1;  // data range
  double left = 70, right = 150, top = 40, bottom = 50, width = 640, height = 400;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

inline std::string tick(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

inline void axes(std::ostringstream& os, const Frame& f, const std::string& title,
                 const std::string& xlabel, const std::string& ylabel) {
  const double xa = f.left, xb = f.width - f.right, ya = f.height - f.bottom, yb = f.top;
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << xml_escape(title) << "</text>\n";
  os << "<line x1=\"" << xa << "\" y1=\"" << ya << "\" x2=\"" << xb << "\" y2=\"" << ya
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << xa << "\" y1=\"" << ya << "\" x2=\"" << xa << "\" y2=\"" << yb
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double vx = f.x0 + (f.x1 - f.x0) * k / 4.0, vy = f.y0 + (f.y1 - f.y0) * k / 4.0;
    os << "<text x=\"" << f.px(vx) << "\" y=\"" << ya + 16
       << "\" text-anchor=\"middle\" font-size=\"11\">" << tick(vx) << "</text>\n";
    os << "<text x=\"" << xa - 6 << "\" y=\"" << f.py(vy) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << tick(vy) << "</text>\n";
  }
  os << "<text x=\"" << (xa + xb) / 2 << "\" y=\"" << f.height - 10
     << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (ya + yb) / 2 << "\" text-anchor=\"middle\" font-size=\"12\""
     << " transform=\"rotate(-90 16 " << (ya + yb) / 2 << ")\">" << xml_escape(ylabel)
     << "</text>\n";
}

}  // namespace detail

inline std::string line_chart_svg(const std::string& title, const std::string& xlabel,
                                  const std::string& ylabel, const std::vector<Series>& series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  detail::widen(x0, x1);
  detail::widen(y0, y1);
  const detail::Frame f{x0, x1, y0, y1};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
     << f.height << "\" font-family=\"sans-serif\">\n";
  detail::axes(os, f, title, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill=\"none\" stroke-width=\"1.8\" stroke=\"" << detail::palette(k)
       << "\" points=\"";
    for (std::size_t j = 0; j < std::min(s.x.size(), s.y.size()); ++j)
      if (std::isfinite(s.x[j]) && std::isfinite(s.y[j]))
        os << f.px(s.x[j]) << ',' << f.py(s.y[j]) << ' ';
    os << "\"/>\n";
    const double ly = f.top + 16.0 * static_cast<double>(k);
    const double lx = f.width - f.right + 12;
    os << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 18 << "\" y2=\"" << ly
       << "\" stroke-width=\"2\" stroke=\"" << detail::palette(k) << "\"/>\n";
    os << "<text x=\"" << lx + 22 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
       << detail::xml_escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Leaves along the x axis in tree order, merges drawn as brackets at their
// height. Inverted centroid merges are drawn as they are.
inline std::string dendrogram_svg(const Dendrogram& d, const std::string& title) {
  d.validate();
  const std::size_t n = d.items();
  std::vector<double> x(2 * n - 1, 0.0), y(2 * n - 1, 0.0);
  std::vector<std::size_t> order;
  if (n == 1) order.push_back(0);
  else {
    std::function<void(std::size_t)> walk = [&](std::size_t id) {
      if (id < n) {
        order.push_back(id);
        return;
      }
      walk(d.merges[id - n].left);
      walk(d.merges[id - n].right);
    };
    walk(2 * n - 2);
  }
  for (std::size_t k = 0; k < order.size(); ++k) x[order[k]] = static_cast<double>(k + 1);
  double hmin = 0, hmax = 0;
  for (std::size_t s = 0; s < d.merges.size(); ++s) {
    const auto& m = d.merges[s];
    x[n + s] = 0.5 * (x[m.left] + x[m.right]);
    y[n + s] = m.height;
    hmin = std::min(hmin, m.height);
    hmax = std::max(hmax, m.height);
  }
  double x0 = 0.5, x1 = static_cast<double>(n) + 0.5;
  detail::widen(hmin, hmax);
  detail::Frame f{x0, x1, hmin, hmax};
  f.right = 30;
  f.bottom = 80;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
     << f.height << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << detail::xml_escape(title) << "</text>\n";
  const double ya = f.height - f.bottom;
  os << "<line x1=\"" << f.left << "\" y1=\"" << ya << "\" x2=\"" << f.left << "\" y2=\"" << f.top
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = hmin + (hmax - hmin) * k / 4.0;
    os << "<text x=\"" << f.left - 6 << "\" y=\"" << f.py(v) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << detail::tick(v) << "</text>\n";
  }
  const char* ylabel =
      d.height_mode == HeightMode::step_index ? "merge step" : "linkage distance";
  os << "<text x=\"16\" y=\"" << (ya + f.top) / 2 << "\" text-anchor=\"middle\" font-size=\"12\""
     << " transform=\"rotate(-90 16 " << (ya + f.top) / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t s = 0; s < d.merges.size(); ++s) {
    const auto& m = d.merges[s];
    const double h = f.py(m.height);
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\""
       << f.px(x[m.left]) << ',' << f.py(y[m.left]) << ' ' << f.px(x[m.left]) << ',' << h << ' '
       << f.px(x[m.right]) << ',' << h << ' ' << f.px(x[m.right]) << ',' << f.py(y[m.right])
       << "\"/>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = f.px(x[i]), ly = f.py(0) + 12;
    os << "<text x=\"" << lx << "\" y=\"" << ly << "\" font-size=\"11\" text-anchor=\"end\""
       << " transform=\"rotate(-60 " << lx << ' ' << ly << ")\">"
       << detail::xml_escape(d.leaves[i]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace raschsel
