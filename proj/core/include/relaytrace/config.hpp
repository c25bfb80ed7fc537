#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relaytrace/analytics.hpp"
#include "relaytrace/detector.hpp"

namespace relaytrace {

struct AnalyticsSettings {
  std::uint64_t country_min_total = 1000;
  std::uint64_t yoy_min_phishing = 100;
  std::size_t top_k = 100;
  ConcentrationThresholds concentration;
};

struct TablePaths {
  std::optional<std::filesystem::path> asn;
  std::optional<std::filesystem::path> geo;
  std::optional<std::filesystem::path> geo_fallback;
  std::optional<std::filesystem::path> provider;
  std::optional<std::filesystem::path> mx;
};

struct RunConfig {
  std::vector<std::filesystem::path> corpus;
  TablePaths tables;
  std::vector<std::string> periods;  // empty: every period in the corpus
  AnalyticsSettings analytics;
  DetectorParams detector;
  std::filesystem::path output_dir = "out";
  std::size_t shard_count = 1;
  std::optional<std::filesystem::path> state_path;
  bool export_features = false;
  std::vector<std::string> comparison_orgs;  // empty: every pre-filtered org
};

enum class Command { Analyze, Detect, ValidatePaths, CheckConfig };

// JSON config text. Relative paths are resolved against `base_dir`.
// Unknown keys and wrong types raise ConfigError naming the field.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

// Range checks plus existence of every path `command` needs.
void validate_config(const RunConfig& config, Command command);

// Canonical JSON echo used in the run manifest.
std::string config_to_json(const RunConfig& config);

// Accepts "YYYY-MM".
bool is_period_label(std::string_view s) noexcept;

}  // namespace relaytrace
