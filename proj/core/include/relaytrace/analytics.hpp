#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "relaytrace/enrich.hpp"
#include "relaytrace/ingest.hpp"
#include "relaytrace/relay_path.hpp"
#include "relaytrace/time.hpp"

namespace relaytrace {

// Phishing/clean counters for one entity in one period. Merging is a
// commutative monoid: counts add, the phishing time range widens.
struct EntityAggregate {
  std::string entity;
  std::string period;
  std::uint64_t phishing_count = 0;
  std::uint64_t clean_count = 0;
  std::optional<Timestamp> first_phishing_at;
  std::optional<Timestamp> last_phishing_at;

  std::uint64_t total() const noexcept { return phishing_count + clean_count; }
  void add(Label label, Timestamp at);
  void merge(const EntityAggregate& other);

  friend bool operator==(const EntityAggregate&, const EntityAggregate&) = default;
};

using AggregateMap = std::map<std::string, EntityAggregate>;

// Throws EmptyEntity when the aggregate holds no emails.
double probability_of_phishing(const EntityAggregate& agg);

enum class ConcentrationCategory : std::uint8_t { Low, Medium, High, InsufficientVolume };
std::string_view to_string(ConcentrationCategory c) noexcept;

struct ConcentrationThresholds {
  double medium_from = 0.001;  // Low below this
  double high_from = 0.02;
  std::uint64_t min_high_phishing = 150;  // High needs strictly more phishing than this
};

ConcentrationCategory classify_concentration(const EntityAggregate& agg,
                                             const ConcentrationThresholds& t = {});

struct CampaignKey {
  std::string from_email;
  std::string normalized_subject;

  // Entity key used in aggregate maps: from_email + '\x1f' + subject.
  std::string key() const;
  friend auto operator<=>(const CampaignKey&, const CampaignKey&) = default;
};

// Lowercases and drops every code point that is not a letter or digit.
std::string normalize_subject(std::string_view subject);
CampaignKey campaign_key(const EmailRecord& record);

enum class CurveMeasure : std::uint8_t { Phishing, Clean };

struct CurvePoint {
  std::size_t rank = 0;
  std::string entity;
  std::uint64_t count = 0;
  double cumulative_fraction = 0.0;
};

// Entities ranked by phishing count (desc, ties by entity key asc);
// point k is the share of `by` held by the top k. Throws EmptyEntity for an
// empty set or a zero total.
std::vector<CurvePoint> cumulative_fraction_curve(const std::vector<EntityAggregate>& aggs,
                                                  CurveMeasure by);

std::vector<EntityAggregate> top_k_by_phishing(const std::vector<EntityAggregate>& aggs,
                                               std::size_t k);

struct VennRegion {
  std::vector<std::string> periods;  // the exact membership pattern
  std::size_t count = 0;
};

// Counts of members belonging to exactly each nonempty subset of `periods`.
// Requires at least two periods.
std::vector<VennRegion> persistence_sets(const std::map<std::string, std::set<std::string>>& categorized,
                                         const std::vector<std::string>& periods);

// last - first phishing timestamp; throws NoPhishing.
std::chrono::seconds phishing_lifespan(const EntityAggregate& agg);

struct AuthCounts {
  std::uint64_t total = 0;
  std::uint64_t spf_or_dkim = 0;
  std::uint64_t spf_and_dkim = 0;
  std::uint64_t dmarc = 0;

  void add(const AuthResults& auth);
  void merge(const AuthCounts& other);
  friend bool operator==(const AuthCounts&, const AuthCounts&) = default;
};

struct AuthPassRates {
  std::uint64_t count = 0;
  double spf_or_dkim = 0.0;
  double spf_and_dkim = 0.0;
  double dmarc = 0.0;
};

struct AuthRatesByLabel {
  std::optional<AuthPassRates> phishing;
  std::optional<AuthPassRates> clean;
};

AuthPassRates pass_rates(const AuthCounts& counts);
AuthRatesByLabel auth_pass_rates(const std::vector<EmailRecord>& records);

// Per-record derived values consumed by every aggregate.
struct RecordFacts {
  std::string message_id;
  std::string period;
  Timestamp delivered_at{};
  Label label = Label::Clean;
  std::string org_id;
  std::string recipient_domain;
  std::optional<IpAddress> origin_ip;
  std::optional<std::uint32_t> origin_asn;
  std::optional<std::string> origin_country;
  std::string route;  // route_key of the country route
  std::size_t path_length = 0;
  std::size_t distinct_countries = 0;
  CampaignKey campaign;
  AuthResults auth;
};

RecordFacts derive_facts(const EmailRecord& record, const RelayPath& path, const AsnTable* asn,
                         const GeoLookup& geo);

struct CohortCounts {
  std::uint64_t shared = 0;
  std::uint64_t unique = 0;
  std::uint64_t no_origin = 0;

  friend bool operator==(const CohortCounts&, const CohortCounts&) = default;
};

struct CohortOverlap {
  CohortCounts no_prefilter;    // phishing at orgs without a pre-filter
  CohortCounts with_prefilter;  // phishing at the comparison orgs
};

// Splits each cohort's phishing emails by whether their origin IP also
// originated phishing in the other cohort. The comparison cohort is every
// pre-filtered org, or only `comparison_orgs` when given. Throws UnknownOrg.
CohortOverlap cohort_overlap(const std::vector<RecordFacts>& records,
                             const std::map<std::string, bool>& prefilter,
                             const std::set<std::string>* comparison_orgs = nullptr);

struct CountryProbability {
  std::string country;
  std::uint64_t phishing = 0;
  std::uint64_t clean = 0;
  double probability = 0.0;
};

// Countries with strictly more than `min_total` emails.
std::vector<CountryProbability> country_probability_table(const AggregateMap& by_country,
                                                          std::uint64_t min_total = 1000);

struct LabelCounts {
  std::uint64_t phishing = 0;
  std::uint64_t clean = 0;

  void add(Label l) { (l == Label::Phishing ? phishing : clean) += 1; }
  void merge(const LabelCounts& o) {
    phishing += o.phishing;
    clean += o.clean;
  }
  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

std::map<std::size_t, LabelCounts> distinct_country_histogram(const std::vector<RecordFacts>& records);

struct YoyPoint {
  std::string asn;
  double prob_a = 0.0;
  double prob_b = 0.0;
  std::uint64_t phishing_a = 0;
  std::uint64_t phishing_b = 0;
};

// ASes with at least `min_phishing` phishing emails in either period; an AS
// absent from one period has probability 0 there.
std::vector<YoyPoint> yoy_scatter(const AggregateMap& a, const AggregateMap& b,
                                  std::uint64_t min_phishing = 100);

struct PeriodStats {
  AggregateMap by_ip;
  AggregateMap by_asn;
  AggregateMap by_country;
  AggregateMap by_route;
  AggregateMap by_campaign;  // phishing only
  AuthCounts auth_phishing;
  AuthCounts auth_clean;
  std::map<std::size_t, LabelCounts> path_length_hist;
  std::map<std::size_t, LabelCounts> distinct_country_hist;
  LabelCounts totals;
  LabelCounts no_origin;

  void add(const RecordFacts& facts);
  void merge(const PeriodStats& other);
  friend bool operator==(const PeriodStats&, const PeriodStats&) = default;
};

using PeriodMap = std::map<std::string, PeriodStats, std::less<>>;

// Period-keyed reduction over RecordFacts.
class Aggregator {
 public:
  void add(const RecordFacts& facts);
  void merge(const Aggregator& other);

  const PeriodMap& periods() const noexcept { return periods_; }
  const PeriodStats* period(std::string_view label) const;
  std::vector<std::string> period_labels() const;

  friend bool operator==(const Aggregator&, const Aggregator&) = default;

 private:
  PeriodMap periods_;
};

std::vector<EntityAggregate> values(const AggregateMap& map);

}  // namespace relaytrace
