#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trajad/scenario.hpp"

namespace trajad {

inline constexpr int kDatasetSchemaVersion = 1;

// One JSON object per line; coordinates printed with 10 decimals so that
// re-serialising a loaded file reproduces it byte for byte.
std::string serialize_scenario(const Scenario& s);
Scenario parse_scenario(const std::string& line, std::size_t line_number);

void save_dataset(const std::vector<Scenario>& scenarios, const std::filesystem::path& path);
// Throws ParseError (with line number) on malformed lines and VersionError on
// schema mismatch. Blank lines are skipped.
std::vector<Scenario> load_dataset(const std::filesystem::path& path);

}  // namespace trajad
