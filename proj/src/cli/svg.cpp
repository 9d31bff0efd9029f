#include <algorithm>
#include <iomanip>
#include <sstream>

#include "scalematch/cli/cli.hpp"

namespace scalematch::cli {
namespace {

std::string escape_xml(std::string_view text) {
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

}  // namespace

std::string render_svg(const stats::DivergenceReport& report, std::string_view title) {
  constexpr double kWidth = 800.0;
  constexpr double kHeight = 420.0;
  constexpr double kLeft = 60.0;
  constexpr double kRight = 20.0;
  constexpr double kTop = 50.0;
  constexpr double kBottom = 50.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  const std::size_t bins = report.prob_source.size();
  double peak = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    peak = std::max({peak, report.prob_source[k], report.prob_target[k]});
  }
  if (peak <= 0.0) peak = 1.0;
  const double lo = report.boundaries.front();
  const double hi = report.boundaries.back();
  const double span = hi > lo ? hi - lo : 1.0;

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(3);
  svg << R"(<?xml version="1.0" encoding="UTF-8"?>)" << '\n'
      << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kWidth << R"(" height=")"
      << kHeight << R"(" viewBox="0 0 )" << kWidth << ' ' << kHeight << R"(">)" << '\n'
      << "<title>" << escape_xml(title) << "</title>\n"
      << R"(<style>.source{fill:#d95f02;fill-opacity:0.55}.target{fill:#1b9e77;fill-opacity:0.55})"
      << R"(text{font-family:sans-serif;font-size:13px}</style>)" << '\n'
      << R"(<text x=")" << kLeft << R"(" y="22">)" << escape_xml(title) << "</text>\n"
      << R"(<text x=")" << kLeft << R"(" y="40">JS = )" << std::setprecision(6) << report.js
      << std::setprecision(3) << " nats</text>\n";

  auto bar = [&](std::size_t k, double p, const char* cls) {
    const double x0 = kLeft + plot_w * (report.boundaries[k] - lo) / span;
    const double x1 = kLeft + plot_w * (report.boundaries[k + 1] - lo) / span;
    const double h = plot_h * p / peak;
    svg << R"(<rect class="bar )" << cls << R"(" x=")" << x0 << R"(" y=")"
        << kTop + plot_h - h << R"(" width=")" << std::max(0.0, x1 - x0) << R"(" height=")" << h
        << R"("/>)" << '\n';
  };
  for (std::size_t k = 0; k < bins; ++k) bar(k, report.prob_target[k], "target");
  for (std::size_t k = 0; k < bins; ++k) bar(k, report.prob_source[k], "source");

  svg << R"(<line x1=")" << kLeft << R"(" y1=")" << kTop + plot_h << R"(" x2=")"
      << kLeft + plot_w << R"(" y2=")" << kTop + plot_h << R"(" stroke="black"/>)" << '\n'
      << R"(<text x=")" << kLeft << R"(" y=")" << kHeight - 15 << R"(">)" << lo << "</text>\n"
      << R"(<text x=")" << kLeft + plot_w - 40 << R"(" y=")" << kHeight - 15 << R"(">)" << hi
      << "</text>\n"
      << R"(<text x=")" << kLeft + plot_w / 2 - 60 << R"(" y=")" << kHeight - 15
      << R"(">object size (px)</text>)" << '\n'
      << R"(<text x=")" << kLeft + plot_w - 160 << R"(" y="22" class="legend">)"
      << R"(<tspan fill="#1b9e77">target</tspan> / <tspan fill="#d95f02">source</tspan></text>)"
      << '\n'
      << "</svg>\n";
  return svg.str();
}

}  // namespace scalematch::cli
