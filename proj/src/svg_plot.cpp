#include "trajad/svg_plot.hpp"

#include <array>
#include <cstdio>

namespace trajad {
namespace {

constexpr double kWidth = 480, kHeight = 440;
constexpr double kLeft = 60, kTop = 40, kPlot = 340;

constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double px(double fpr) { return kLeft + fpr * kPlot; }
double py(double tpr) { return kTop + (1.0 - tpr) * kPlot; }

}  // namespace

std::string roc_svg(const std::vector<RocCurve>& curves, std::string_view title, std::string_view config_hash) {
  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<!-- config_hash=" + std::string(config_hash) + " -->\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kLeft + kPlot / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"13\">" +
       escape(title) + "</text>\n";
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kPlot) + "\" height=\"" + num(kPlot) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    s += "<text x=\"" + num(px(v)) + "\" y=\"" + num(kTop + kPlot + 16) + "\" text-anchor=\"middle\">" + num(v) +
         "</text>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(v) + 4) + "\" text-anchor=\"end\">" + num(v) +
         "</text>\n";
  }
  s += "<text x=\"" + num(kLeft + kPlot / 2) + "\" y=\"" + num(kTop + kPlot + 34) +
       "\" text-anchor=\"middle\">false positive rate</text>\n";
  s += "<text transform=\"translate(18 " + num(kTop + kPlot / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">true positive rate</text>\n";
  s += "<line x1=\"" + num(px(0)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(1)) + "\" y2=\"" + num(py(1)) +
       "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % kColors.size()];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [fpr, tpr] : curves[c].points) s += num(px(fpr)) + "," + num(py(tpr)) + " ";
    s += "\"/>\n";
    const double ly = kTop + kPlot - 12 - 14.0 * static_cast<double>(curves.size() - 1 - c);
    s += "<line x1=\"" + num(kLeft + kPlot - 150) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
         num(kLeft + kPlot - 132) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(kLeft + kPlot - 128) + "\" y=\"" + num(ly) + "\">" + escape(curves[c].label) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace trajad
