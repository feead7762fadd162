#include "svg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tiad/error.hpp"

namespace tiad::plot {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string render_svg(const LinePlot& p) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double xspan = p.x_max > p.x_min ? p.x_max - p.x_min : 1.0;
  const double yspan = p.y_max > p.y_min ? p.y_max - p.y_min : 1.0;
  auto X = [&](double x) { return kLeft + (x - p.x_min) / xspan * pw; };
  auto Y = [&](double y) { return kTop + ph - (y - p.y_min) / yspan * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(p.title)
    << "</text>\n";
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double yv = p.y_min + yspan * i / 5.0;
    o << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kLeft + pw) << "\" y1=\"" << num(Y(yv)) << "\" y2=\""
      << num(Y(yv)) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(Y(yv) + 4) << "\" text-anchor=\"end\">" << tick_label(yv)
      << "</text>\n";
  }
  std::vector<std::pair<double, std::string>> xt = p.x_ticks;
  if (xt.empty()) {
    for (int i = 0; i <= 5; ++i) {
      const double xv = p.x_min + xspan * i / 5.0;
      xt.emplace_back(xv, tick_label(xv));
    }
  }
  for (const auto& [xv, label] : xt) {
    o << "<line x1=\"" << num(X(xv)) << "\" x2=\"" << num(X(xv)) << "\" y1=\"" << num(kTop + ph) << "\" y2=\""
      << num(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(X(xv)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
      << escape(label) << "</text>\n";
  }
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15) << "\" text-anchor=\"middle\">"
    << escape(p.x_label) << "</text>\n";
  o << "<text transform=\"translate(18 " << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(p.y_label) << "</text>\n";

  for (const auto& m : p.markers) {
    o << "<line class=\"event\" x1=\"" << num(X(m.x)) << "\" x2=\"" << num(X(m.x)) << "\" y1=\"" << num(kTop)
      << "\" y2=\"" << num(kTop + ph) << "\" stroke=\"black\" stroke-dasharray=\"2 3\"/>\n";
    o << "<text x=\"" << num(X(m.x) + 4) << "\" y=\"" << num(kTop + 14) << "\">" << escape(m.label) << "</text>\n";
  }

  std::size_t color = 0;
  for (const auto& s : p.series) {
    const char* stroke = s.dashed ? "#777" : kPalette[color++ % std::size(kPalette)];
    if (!s.points.empty()) {
      o << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        o << (i ? " " : "") << num(X(s.points[i].x)) << ',' << num(Y(s.points[i].y));
      }
      o << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto& pt = s.points[i];
      if (i < s.error.size() && s.error[i] > 0) {
        o << "<line x1=\"" << num(X(pt.x)) << "\" x2=\"" << num(X(pt.x)) << "\" y1=\"" << num(Y(pt.y - s.error[i]))
          << "\" y2=\"" << num(Y(pt.y + s.error[i])) << "\" stroke=\"" << stroke << "\"/>\n";
      }
      if (s.markers) {
        o << "<circle cx=\"" << num(X(pt.x)) << "\" cy=\"" << num(Y(pt.y)) << "\" r=\"3\" fill=\"" << stroke
          << "\"/>\n";
      }
    }
  }

  double ly = kTop + 10;
  color = 0;
  for (const auto& s : p.series) {
    const char* stroke = s.dashed ? "#777" : kPalette[color++ % std::size(kPalette)];
    const double lx = kLeft + pw + 12;
    o << "<line x1=\"" << num(lx) << "\" x2=\"" << num(lx + 20) << "\" y1=\"" << num(ly) << "\" y2=\"" << num(ly)
      << "\" stroke=\"" << stroke << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "")
      << "/>\n";
    o << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.name) << "</text>\n";
    ly += 18;
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const LinePlot& plot, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  out << render_svg(plot);
  if (!out) throw FormatError("cannot write " + path);
}

}  // namespace tiad::plot
