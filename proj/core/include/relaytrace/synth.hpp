#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relaytrace/authenticity.hpp"
#include "relaytrace/enrich.hpp"
#include "relaytrace/ingest.hpp"
#include "relaytrace/time.hpp"

namespace relaytrace {

enum class ArchetypeKind : std::uint8_t {
  PersistentHighConcentration,
  BurstSender,
  CompromisedAccount,
  LowConcentrationCloud,
  BenignBackground,
};
std::string_view to_string(ArchetypeKind k) noexcept;
std::optional<ArchetypeKind> parse_archetype_kind(std::string_view s) noexcept;

struct Burst {
  Timestamp start{};
  std::int64_t minutes = 30;
};

struct ArchetypeSpec {
  ArchetypeKind kind = ArchetypeKind::BenignBackground;
  std::string name;  // defaults to "<kind>-<index>"
  std::uint32_t asn = 0;
  std::string owner;
  std::string country = "US";
  std::string provider_tag;  // optional provider-table tag for the AS block
  std::uint32_t ip_count = 1;
  std::uint64_t phishing = 0;
  std::uint64_t clean = 0;
  std::uint32_t campaigns = 5;
  std::vector<std::string> months;        // restrict activity; empty = whole range
  std::vector<Burst> bursts;              // BurstSender phishing windows
  std::optional<Timestamp> active_start;  // CompromisedAccount phishing window
  std::int64_t active_days = 7;
  double relay_share = 0.0;  // clean mail relayed through the third-party relay AS
};

// Knobs for the shared infrastructure and header shapes.
struct ScenarioSpec {
  std::uint64_t seed = 1;
  Day start{};
  Day end{};  // inclusive
  std::uint32_t organizations = 8;
  double prefilter_share = 0.5;        // orgs whose MX is a third-party filter
  double forged_fraction = 0.0;        // share of phishing with forged early hops
  double same_as_forgery_share = 0.3;  // of forged: fake origin in the sender's AS
  double private_hop_share = 0.3;      // leading submission hop from a private address
  double same_as_relay_share = 0.2;    // extra relay hop inside the sender's AS
  std::uint64_t internal_clean = 0;    // single-hop mail sent from a recipient MX address
  std::vector<ArchetypeSpec> archetypes;
};

// Throws InvalidSpec.
ScenarioSpec parse_scenario(std::string_view json_text);
ScenarioSpec load_scenario(const std::filesystem::path& path);
void validate_scenario(const ScenarioSpec& spec);

enum class ForgeryKind : std::uint8_t { None, SameAs, CrossAs };
std::string_view to_string(ForgeryKind k) noexcept;

// Hidden ground truth for one record.
struct TruthRow {
  std::string message_id;
  std::string archetype;
  ArchetypeKind kind = ArchetypeKind::BenignBackground;  // meaningless when internal
  bool internal = false;
  Label label = Label::Clean;
  ForgeryKind forgery = ForgeryKind::None;
  std::string origin_ip;  // the real sender, regardless of forgery
};

struct MxRow {
  std::string domain;
  Day date{};
  IpAddress ip;
};

struct GeneratedScenario {
  std::vector<EmailRecord> records;  // sorted by delivered_at
  std::vector<TruthRow> truth;       // parallel to records
  std::vector<std::pair<Cidr, AsnInfo>> asn_rows;
  std::vector<std::pair<Cidr, std::string>> geo_rows;
  std::vector<std::pair<Cidr, std::string>> provider_rows;
  std::vector<MxRow> mx_rows;

  AsnTable asn_table() const;
  GeoTable geo_table() const;
  ProviderTable provider_table() const;
  MxSnapshot mx_snapshot() const;
};

// Same spec (including seed) gives byte-identical output.
GeneratedScenario generate(const ScenarioSpec& spec);

// Writes corpus.jsonl, truth.tsv, asn.csv, geo.csv, provider.csv, mx.csv and
// a config.json wired to them.
void write_scenario(const GeneratedScenario& scenario, const std::filesystem::path& dir);

}  // namespace relaytrace
