#include "relaytrace/authenticity.hpp"

#include <cctype>
#include <iterator>

#include "relaytrace/csv.hpp"
#include "relaytrace/errors.hpp"

namespace relaytrace {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains(const IpSet& set, const std::optional<IpAddress>& ip) {
  return ip && set.count(*ip) > 0;
}

bool same_as(const std::optional<IpAddress>& a, const std::optional<IpAddress>& b,
             const AsnTable& asn) {
  if (!a || !b) return false;
  const auto* x = asn.lookup(*a);
  const auto* y = asn.lookup(*b);
  return x && y && x->asn == y->asn;
}

}  // namespace

void MxSnapshot::add(std::string domain, Day date, const IpAddress& ip) {
  by_domain_[lower(domain)][date].insert(ip);
}

const IpSet* MxSnapshot::lookup(std::string_view domain, Day date) const {
  const auto dom = by_domain_.find(lower(domain));
  if (dom == by_domain_.end()) return nullptr;
  const auto& dated = dom->second;
  auto it = dated.upper_bound(date);
  if (it == dated.begin()) return nullptr;
  return &std::prev(it)->second;
}

MxSnapshot load_mx_snapshot(const std::filesystem::path& path) {
  MxSnapshot snap;
  bool first = true;
  csv::for_each_row(path, [&](const std::vector<std::string>& f, std::size_t line_no) {
    const bool header_row = first && !f.empty() && iequals(f[0], "domain");
    first = false;
    if (header_row) return;
    const auto where = path.filename().string() + ":" + std::to_string(line_no);
    if (f.size() < 3) throw ParseError(where + ": expected domain,date,ip");
    auto day = parse_date(f[1]);
    if (!day) throw ParseError(where + ": bad date '" + f[1] + "'");
    auto ip = IpAddress::parse(f[2]);
    if (!ip) throw ParseError(where + ": bad ip '" + f[2] + "'");
    if (f[0].empty()) throw ParseError(where + ": empty domain");
    snap.add(f[0], *day, *ip);
  });
  return snap;
}

void BenignPairIndex::add(const EmailRecord& record, const RelayPath& path, const MxSnapshot& mx) {
  if (record.label != Label::Clean) return;
  if (auto seq = public_ip_sequence(path); !seq.empty()) path_set.insert(std::move(seq));
  const auto* servers = mx.lookup(record.recipient_domain, utc_day(record.delivered_at));
  if (!servers || !path.origin_ip) return;
  if (auto sender = mx_identified_sender(path, *servers)) {
    pair_set.emplace(*sender, *path.origin_ip);
  }
}

void BenignPairIndex::merge(const BenignPairIndex& other) {
  pair_set.insert(other.pair_set.begin(), other.pair_set.end());
  path_set.insert(other.path_set.begin(), other.path_set.end());
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::SameAs:
      return "same_as";
    case Verdict::PairMatch:
      return "pair_match";
    case Verdict::FullPathMatch:
      return "full_path_match";
    case Verdict::SingleMxHopExact:
      return "single_mx_hop_exact";
    case Verdict::SingleMxHopSameAs:
      return "single_mx_hop_same_as";
    case Verdict::Unverified:
      break;
  }
  return "unverified";
}

std::string_view to_string(UnverifiedReason r) noexcept {
  switch (r) {
    case UnverifiedReason::None:
      return "";
    case UnverifiedReason::MissingMxSnapshot:
      return "missing_mx_snapshot";
    case UnverifiedReason::NoOrigin:
      return "no_origin";
    case UnverifiedReason::NoTestMatched:
      break;
  }
  return "no_test_matched";
}

std::optional<std::size_t> recipient_server_hop(const RelayPath& path, const IpSet& mx) {
  for (std::size_t i = path.hops.size(); i-- > 0;) {
    if (contains(mx, path.hops[i].by_ip)) return i;
  }
  if (path.hops.size() == 1 && contains(mx, path.hops[0].from_ip)) return 0;
  return std::nullopt;
}

std::optional<IpAddress> mx_identified_sender(const RelayPath& path, const IpSet& mx) {
  for (std::size_t i = path.hops.size(); i-- > 0;) {
    if (contains(mx, path.hops[i].by_ip)) return path.hops[i].from_ip;
  }
  return std::nullopt;
}

ValidationVerdict classify_authenticity(const EmailRecord& record, const RelayPath& path,
                                        const MxSnapshot& mx_snapshot, const AsnTable& asn_table,
                                        const BenignPairIndex& benign_index) {
  ValidationVerdict out;
  const auto* mx = mx_snapshot.lookup(record.recipient_domain, utc_day(record.delivered_at));
  if (!mx) {
    out.reason = UnverifiedReason::MissingMxSnapshot;
    return out;
  }
  out.mx_sender_ip = mx_identified_sender(path, *mx);
  const auto& origin = path.origin_ip;
  if (!origin) {
    out.reason = UnverifiedReason::NoOrigin;
    return out;
  }

  if (same_as(out.mx_sender_ip, origin, asn_table)) {
    out.verdict = Verdict::SameAs;
    return out;
  }
  if (out.mx_sender_ip && benign_index.pair_set.count({*out.mx_sender_ip, *origin})) {
    out.verdict = Verdict::PairMatch;
    return out;
  }
  if (const auto seq = public_ip_sequence(path); !seq.empty() && benign_index.path_set.count(seq)) {
    out.verdict = Verdict::FullPathMatch;
    return out;
  }

  // The MX address must occur exactly once among all hop IPs.
  std::optional<IpAddress> only_mx;
  std::size_t occurrences = 0;
  for (const auto& hop : path.hops) {
    for (const auto* ip : {&hop.from_ip, &hop.by_ip}) {
      if (contains(*mx, *ip)) {
        ++occurrences;
        only_mx = *ip;
      }
    }
  }
  if (occurrences == 1) {
    if (*only_mx == *origin) {
      out.verdict = Verdict::SingleMxHopExact;
      return out;
    }
    if (same_as(only_mx, origin, asn_table)) {
      out.verdict = Verdict::SingleMxHopSameAs;
      return out;
    }
  }
  out.reason = UnverifiedReason::NoTestMatched;
  return out;
}

bool infer_prefilter(std::string_view recipient_domain, Day date, const MxSnapshot& mx_snapshot,
                     const ProviderTable& o365_ranges) {
  const auto* mx = mx_snapshot.lookup(recipient_domain, date);
  if (!mx || mx->empty()) {
    throw MissingMxSnapshot(std::string(recipient_domain), format_date(date));
  }
  for (const auto& ip : *mx) {
    const auto* tag = o365_ranges.lookup(ip);
    if (!tag || *tag != "o365") return true;
  }
  return false;
}

}  // namespace relaytrace
