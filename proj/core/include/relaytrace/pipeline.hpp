#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relaytrace/analytics.hpp"
#include "relaytrace/authenticity.hpp"
#include "relaytrace/config.hpp"
#include "relaytrace/detector.hpp"
#include "relaytrace/enrich.hpp"
#include "relaytrace/ingest.hpp"

namespace relaytrace {

// Runs fn(shard, begin, end) over `shards` contiguous slices of [0, n).
void parallel_slices(std::size_t n, std::size_t shards,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

struct LoadedCorpus {
  std::vector<EmailRecord> records;
  std::vector<std::pair<std::filesystem::path, std::size_t>> skipped;  // per input file

  std::size_t skip_count() const;
};

LoadedCorpus load_corpora(const std::vector<std::filesystem::path>& paths);

struct Tables {
  std::optional<AsnTable> asn;
  std::optional<GeoTable> geo;
  std::optional<GeoTable> geo_fallback;
  std::optional<ProviderTable> provider;
  std::optional<MxSnapshot> mx;

  GeoLookup geo_lookup() const;
  const AsnTable* asn_ptr() const { return asn ? &*asn : nullptr; }
};

Tables load_tables(const TablePaths& paths);

// Shard-parallel reduction; the result does not depend on `shards`.
Aggregator aggregate(const std::vector<EmailRecord>& records, const Tables& tables,
                     std::size_t shards, std::vector<RecordFacts>* facts_out = nullptr);

// org_id -> pre-filtered, judged from each org's earliest record. Orgs
// without an MX snapshot are left out.
std::map<std::string, bool> infer_org_prefilters(const std::vector<EmailRecord>& records,
                                                 const MxSnapshot& mx,
                                                 const ProviderTable& providers);

struct AnalyzeSummary {
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::vector<std::string> periods;
  std::vector<std::filesystem::path> files;
};

// Writes every report plus run_manifest.json into config.output_dir.
AnalyzeSummary cmd_analyze(const RunConfig& config);

struct DetectionRow {
  std::string message_id;
  std::optional<IpAddress> origin_ip;
  Detector::Result result;
  bool scored = false;  // false when the record has no origin IP
};

// The detection pass by itself. Records are split into shards by origin-IP
// hash; each shard advances its own cursor to the corpus-wide running
// maximum day, so rows and final state match a sequential run exactly.
std::vector<DetectionRow> run_detection(const std::vector<EmailRecord>& records,
                                        const DetectorParams& params,
                                        std::optional<WindowState> prior, std::size_t shards,
                                        WindowState* final_state);

struct DetectSummary {
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::size_t flagged = 0;
  std::size_t unscored = 0;
  std::uint64_t stale = 0;
};

// Writes decisions.csv (and features.csv when enabled) and saves the state.
DetectSummary cmd_detect(const RunConfig& config);

struct RecordVerdict {
  std::string message_id;
  std::string period;
  Label label = Label::Clean;
  std::optional<IpAddress> origin_ip;
  ValidationVerdict verdict;
};

// Benign indexes are built per calendar month from that month's clean mail.
std::vector<RecordVerdict> validate_paths(const std::vector<EmailRecord>& records,
                                          const AsnTable& asn, const MxSnapshot& mx,
                                          std::size_t shards);

struct ValidateSummary {
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::map<Verdict, std::size_t> by_verdict;
};

// Writes verdicts.csv and validation_summary.csv.
ValidateSummary cmd_validate_paths(const RunConfig& config);

// Loads a scenario spec and writes the generated corpus and fixtures.
std::size_t cmd_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir);

}  // namespace relaytrace
