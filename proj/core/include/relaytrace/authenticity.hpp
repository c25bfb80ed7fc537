#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relaytrace/enrich.hpp"
#include "relaytrace/ingest.hpp"
#include "relaytrace/relay_path.hpp"
#include "relaytrace/time.hpp"

namespace relaytrace {

using IpSet = std::set<IpAddress>;

// Historical MX records: per domain, dated sets of MX server IPs. A query
// for (domain, date) resolves to the latest snapshot dated on or before it.
class MxSnapshot {
 public:
  void add(std::string domain, Day date, const IpAddress& ip);

  // nullptr when no snapshot for the domain is dated on or before `date`.
  const IpSet* lookup(std::string_view domain, Day date) const;

  std::size_t domain_count() const noexcept { return by_domain_.size(); }

 private:
  std::map<std::string, std::map<Day, IpSet>, std::less<>> by_domain_;
};

// CSV "domain,date,ip"; throws IoError / ParseError.
MxSnapshot load_mx_snapshot(const std::filesystem::path& path);

// (MX-identified sender, origin) pairs and public relay-path IP sequences
// observed in clean mail. Set union makes it mergeable across shards.
struct BenignPairIndex {
  std::set<std::pair<IpAddress, IpAddress>> pair_set;
  std::set<std::vector<IpAddress>> path_set;

  // Ignores anything not labeled Clean.
  void add(const EmailRecord& record, const RelayPath& path, const MxSnapshot& mx);
  void merge(const BenignPairIndex& other);
};

enum class Verdict : std::uint8_t {
  SameAs,
  PairMatch,
  FullPathMatch,
  SingleMxHopExact,
  SingleMxHopSameAs,
  Unverified,
};

enum class UnverifiedReason : std::uint8_t {
  None,
  MissingMxSnapshot,
  NoOrigin,
  NoTestMatched,
};

struct ValidationVerdict {
  Verdict verdict = Verdict::Unverified;
  UnverifiedReason reason = UnverifiedReason::None;
  std::optional<IpAddress> mx_sender_ip;
};

std::string_view to_string(Verdict v) noexcept;
std::string_view to_string(UnverifiedReason r) noexcept;

// Index of the last hop whose by_ip is an MX address; for a single-hop path
// whose only hop has an MX from_ip, that hop.
std::optional<std::size_t> recipient_server_hop(const RelayPath& path, const IpSet& mx);

// from_ip of the last hop received by an MX server.
std::optional<IpAddress> mx_identified_sender(const RelayPath& path, const IpSet& mx);

// Applies the origin checks in fixed order: same AS, benign pair, benign
// full path, single MX hop. A missing MX snapshot yields Unverified with
// reason MissingMxSnapshot.
ValidationVerdict classify_authenticity(const EmailRecord& record, const RelayPath& path,
                                        const MxSnapshot& mx_snapshot, const AsnTable& asn_table,
                                        const BenignPairIndex& benign_index);

// True when the organization likely uses an external filter, i.e. at least
// one MX IP falls outside the O365 ranges. Throws MissingMxSnapshot.
bool infer_prefilter(std::string_view recipient_domain, Day date, const MxSnapshot& mx_snapshot,
                     const ProviderTable& o365_ranges);

}  // namespace relaytrace
