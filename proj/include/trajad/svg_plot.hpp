#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trajad {

struct RocCurve {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
};

// Standalone SVG with one polyline per curve, a chance diagonal and a legend.
// The config hash is written into a leading XML comment.
std::string roc_svg(const std::vector<RocCurve>& curves, std::string_view title, std::string_view config_hash);

}  // namespace trajad
