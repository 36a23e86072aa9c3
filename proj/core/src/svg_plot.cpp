#include "cads/svg_plot.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cads {

namespace {

constexpr double kPanelSize = 320.0;
constexpr double kMargin = 34.0;
constexpr double kTitleBand = 40.0;

// Well-spread hues for up to a few dozen labels.
std::string label_color(int label) {
  if (label < 0) return "#777777";
  const double hue = std::fmod(label * 137.508, 360.0);
  const double saturation = 0.72;
  const double value = 0.85;
  const double c = value * saturation;
  const double x = c * (1.0 - std::abs(std::fmod(hue / 60.0, 2.0) - 1.0));
  const double m = value - c;
  double r = 0, g = 0, b = 0;
  if (hue < 60) { r = c; g = x; }
  else if (hue < 120) { r = x; g = c; }
  else if (hue < 180) { g = c; b = x; }
  else if (hue < 240) { g = x; b = c; }
  else if (hue < 300) { r = x; b = c; }
  else { r = c; b = x; }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(std::lround((r + m) * 255.0)),
                static_cast<int>(std::lround((g + m) * 255.0)),
                static_cast<int>(std::lround((b + m) * 255.0)));
  return buf;
}

std::string escape_xml(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

void write_scatter_svg(const std::filesystem::path& path,
                       const std::vector<ScatterPanel>& panels,
                       double axis_extent, const std::string& figure_title) {
  if (panels.empty()) {
    throw std::invalid_argument("write_scatter_svg: no panels");
  }
  if (axis_extent <= 0.0) {
    throw std::invalid_argument("write_scatter_svg: axis extent must be positive");
  }

  const double panel_stride = kPanelSize + 2.0 * kMargin;
  const double width = panel_stride * panels.size();
  const double height = kPanelSize + 2.0 * kMargin + kTitleBand;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write svg: " + path.string());
  char buf[256];

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
                "width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  os << buf;
  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << width / 2.0
     << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
        "text-anchor=\"middle\">"
     << escape_xml(figure_title) << "</text>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double x0 = p * panel_stride + kMargin;
    const double y0 = kTitleBand + kMargin;
    auto to_px_x = [&](double v) {
      return x0 + (v + axis_extent) / (2.0 * axis_extent) * kPanelSize;
    };
    auto to_px_y = [&](double v) {
      return y0 + (axis_extent - v) / (2.0 * axis_extent) * kPanelSize;
    };

    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                  "fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
                  x0, y0, kPanelSize, kPanelSize);
    os << buf;
    os << "<text x=\"" << x0 + kPanelSize / 2.0 << "\" y=\"" << y0 - 10.0
       << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
       << escape_xml(panels[p].title) << "</text>\n";

    // Axis extent labels.
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                  "font-size=\"10\" text-anchor=\"middle\">%.3g</text>\n",
                  x0, y0 + kPanelSize + 14.0, -axis_extent);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                  "font-size=\"10\" text-anchor=\"middle\">%.3g</text>\n",
                  x0 + kPanelSize, y0 + kPanelSize + 14.0, axis_extent);
    os << buf;

    for (const auto& point : panels[p].points) {
      const double cx = to_px_x(point.point[0]);
      const double cy = to_px_y(point.point[1]);
      if (cx < x0 || cx > x0 + kPanelSize || cy < y0 || cy > y0 + kPanelSize) {
        continue;  // clipped to the shared axis range
      }
      std::snprintf(buf, sizeof(buf),
                    "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.6\" fill=\"%s\" "
                    "fill-opacity=\"0.75\"/>\n",
                    cx, cy, label_color(point.label).c_str());
      os << buf;
    }
  }
  os << "</svg>\n";
  if (!os) throw std::runtime_error("svg write failed: " + path.string());
}

}  // namespace cads
