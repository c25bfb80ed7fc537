#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relaytrace/analytics.hpp"
#include "relaytrace/enrich.hpp"
#include "relaytrace/ingest.hpp"
#include "relaytrace/ip.hpp"
#include "relaytrace/relay_path.hpp"
#include "relaytrace/time.hpp"

namespace relaytrace {

struct DetectorParams {
  int window_days = 14;           // [0, 90]
  std::uint64_t min_phishing = 10;
  double risk_threshold = 0.5;    // (0, 1]
  double smoothing = 1.0;         // >= 0

  // Throws ConfigError naming the out-of-range field.
  void validate() const;
};

struct DayBucket {
  std::int32_t day = 0;  // days since 1970-01-01 UTC
  std::uint32_t phishing = 0;
  std::uint32_t clean = 0;

  friend bool operator==(const DayBucket&, const DayBucket&) = default;
};

struct WindowCounts {
  std::uint64_t phishing = 0;
  std::uint64_t clean = 0;

  friend bool operator==(const WindowCounts&, const WindowCounts&) = default;
};

enum class EventOutcome : std::uint8_t { Applied, Stale };

// Per-IP day buckets covering the last `window_days` UTC days ending at a
// shared day cursor. Buckets older than the window are evicted; events
// dated before the window are rejected as stale and counted.
class WindowState {
 public:
  explicit WindowState(int window_days = DetectorParams{}.window_days);

  int window_days() const noexcept { return window_days_; }
  std::optional<std::int32_t> current_day() const noexcept { return current_day_; }
  std::uint64_t stale_count() const noexcept { return stale_; }
  std::size_t ip_count() const noexcept { return buckets_.size(); }

  // Moves the cursor forward; never backwards.
  void advance_to(std::int32_t day);
  void advance_to(Timestamp at);

  EventOutcome record_event(const IpAddress& ip, Timestamp at, Label label);

  // Sums over [as_of - window_days + 1, as_of]; as_of defaults to the cursor.
  WindowCounts window_counts(const IpAddress& ip) const;
  WindowCounts window_counts(const IpAddress& ip, std::int32_t as_of) const;

  // Bucket-wise addition; the cursor becomes the later of the two.
  void merge(const WindowState& other);

  // Evicts expired buckets everywhere and drops IPs with no buckets.
  void compact();

  // IPs in ascending order with their retained buckets, oldest first.
  std::vector<std::pair<IpAddress, std::vector<DayBucket>>> snapshot() const;

  // Compares canonical (compacted) contents.
  friend bool operator==(const WindowState& a, const WindowState& b);

  // Restores a snapshot; used by the state loader.
  static WindowState from_parts(int window_days, std::optional<std::int32_t> current_day,
                                std::uint64_t stale,
                                std::vector<std::pair<IpAddress, std::vector<DayBucket>>> ips);

 private:
  std::int32_t window_start() const noexcept;
  void evict(std::vector<DayBucket>& buckets) const;

  int window_days_;
  std::optional<std::int32_t> current_day_;
  std::uint64_t stale_ = 0;
  std::unordered_map<IpAddress, std::vector<DayBucket>> buckets_;
};

std::int32_t day_number(Timestamp at);

struct RiskScore {
  double score = 0.0;
  std::uint64_t window_phishing = 0;
  std::uint64_t window_clean = 0;
};

enum class Decision : std::uint8_t { Flag, Pass };
std::string_view to_string(Decision d) noexcept;

// score = P / (P + C + smoothing) over the window ending at `at`'s day.
RiskScore risk_score(const WindowState& state, const IpAddress& ip, Timestamp at,
                     const DetectorParams& params);

// Flag iff P >= min_phishing and score >= risk_threshold.
Decision classify(const WindowState& state, const IpAddress& ip, Timestamp at,
                  const DetectorParams& params);
Decision decide(const RiskScore& score, const DetectorParams& params);

// Classifies each email against its IP's history, then records it.
class Detector {
 public:
  explicit Detector(DetectorParams params);
  Detector(DetectorParams params, WindowState state);

  struct Result {
    Decision decision = Decision::Pass;
    RiskScore score;
    EventOutcome outcome = EventOutcome::Applied;
  };

  Result process(const IpAddress& ip, Timestamp at, Label label);

  const DetectorParams& params() const noexcept { return params_; }
  const WindowState& state() const noexcept { return state_; }
  WindowState& state() noexcept { return state_; }

 private:
  DetectorParams params_;
  WindowState state_;
};

inline constexpr int kStateFormatVersion = 1;

// Versioned, checksummed text container. Loading rejects unknown versions
// with VersionMismatch and any damage with ParseError.
std::string serialize_state(const WindowState& state);
WindowState parse_state(std::string_view text);
void save_state(const WindowState& state, const std::filesystem::path& path);
WindowState load_state(const std::filesystem::path& path);

// The twelve network features, in export column order.
struct FeatureVector {
  double ip_phishing_probability = 0.0;
  double ip_phishing_volume = 0.0;
  double as_phishing_probability = 0.0;
  double as_phishing_volume = 0.0;
  double country_phishing_probability = 0.0;
  double country_phishing_volume = 0.0;
  double path_length = 0.0;
  double distinct_countries = 0.0;
  double route_phishing_probability = 0.0;
  double spf_pass = 0.0;
  double dkim_pass = 0.0;
  double dmarc_pass = 0.0;

  std::array<double, 12> values() const;
  static const std::array<std::string_view, 12>& column_names();
};

// Entities absent from `aggregates` contribute probability 0 and volume 0.
FeatureVector extract_features(const EmailRecord& record, const RelayPath& path,
                               const PeriodStats* aggregates, const GeoLookup& geo,
                               const AsnTable* asn);

}  // namespace relaytrace
