#include "gencaps/svg.hpp"

#include <array>
#include <cstdio>
#include <string_view>

namespace gencaps {

namespace {

constexpr std::array<std::string_view, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                      "#9467bd", "#ff7f0e", "#8c564b"};
constexpr std::string_view kNone = "#9e9e9e";

// The plot shows [-kExtent, kExtent]^2 with y pointing up.
constexpr double kExtent = 1.15;

std::string_view colour(int label) {
  if (label <= 0) return kNone;
  return kPalette[static_cast<std::size_t>(label - 1) % kPalette.size()];
}

std::string fmt(const char* f, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
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

std::string render_svg(const PlotData& data, const TemplateLibrary& lib, int size_px) {
  const double px = size_px;
  auto sx = [&](double x) { return (x + kExtent) / (2.0 * kExtent) * px; };
  auto sy = [&](double y) { return (kExtent - y) / (2.0 * kExtent) * px; };
  auto at = [&](const Vec2& p) { return fmt("%.3f,%.3f", sx(p.x()), sy(p.y())); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size_px) +
       "\" height=\"" + std::to_string(size_px + 24) + "\" viewBox=\"0 0 " +
       std::to_string(size_px) + " " + std::to_string(size_px + 24) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"6\" y=\"" + std::to_string(size_px + 17) +
       "\" font-family=\"monospace\" font-size=\"12\">" + escape(data.title) + "</text>\n";

  // Frame of the normalized square [-1, 1]^2.
  const std::string lo = at(Vec2(-1, 1));
  const double side = sx(1) - sx(-1);
  const auto comma = lo.find(',');
  s += "<rect x=\"" + lo.substr(0, comma) + "\" y=\"" + lo.substr(comma + 1) + "\" width=\"" +
       fmt("%.3f", side, 0) + "\" height=\"" + fmt("%.3f", side, 0) +
       "\" fill=\"none\" stroke=\"#dddddd\"/>\n";

  for (const auto& op : data.recovered) {
    const auto verts = lib.at(op.object).transform(op.pose);
    const std::string_view c = colour(static_cast<int>(op.object) + 1);
    s += "<polygon points=\"";
    for (std::size_t i = 0; i < verts.size(); ++i) {
      if (i) s += ' ';
      s += at(verts[i]);
    }
    s += "\" fill=\"none\" stroke=\"" + std::string(c) +
         "\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"/>\n";
    for (const auto& v : verts) {
      s += "<path d=\"M" + fmt("%.3f %.3f", sx(v.x()) - 4, sy(v.y()) - 4) + " l8 8 m0 -8 l-8 8\"" +
           " stroke=\"" + std::string(c) + "\" stroke-width=\"1.2\"/>\n";
    }
  }

  for (std::size_t m = 0; m < data.points.size(); ++m) {
    const int t = m < data.truth.size() ? data.truth[m] : 0;
    const int p = m < data.predicted.size() ? data.predicted[m] : 0;
    s += "<circle cx=\"" + fmt("%.3f", sx(data.points[m].x()), 0) + "\" cy=\"" +
         fmt("%.3f", sy(data.points[m].y()), 0) + "\" r=\"5\" fill=\"" + std::string(colour(p)) +
         "\" stroke=\"" + std::string(colour(t)) + "\" stroke-width=\"2.5\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace gencaps
