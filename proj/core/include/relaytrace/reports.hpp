#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relaytrace/analytics.hpp"
#include "relaytrace/config.hpp"

namespace relaytrace {

struct ReportInputs {
  const Aggregator* aggregator = nullptr;
  std::vector<std::string> periods;  // report order
  AnalyticsSettings settings;
  // Cohort overlap per period plus the whole-corpus row under "all".
  std::map<std::string, CohortOverlap> cohorts;
  bool cohorts_available = false;
};

// File name -> CSV text. Every report is emitted, with a header row even
// when it has no data.
std::map<std::string, std::string> render_reports(const ReportInputs& in);

// Names of the report files render_reports produces.
const std::vector<std::string>& report_file_names();

}  // namespace relaytrace
