#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "owlkit/owl.hpp"

namespace owlkit::cli {

struct ReportConfig {
  std::vector<std::string> near;  // dataset names (file stems) averaged as near-OOD
  std::vector<std::string> far;
  double tpr = 0.95;
};

/// Everything a run file can set. Sections: [scorer], [cil], [owl], [report].
struct RunConfig {
  OwlConfig owl;
  ReportConfig report;
};

/// Parses TOML text. Unknown sections or keys and mistyped values are config errors.
RunConfig parse_config(const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::filesystem::path& path);

} // namespace owlkit::cli
