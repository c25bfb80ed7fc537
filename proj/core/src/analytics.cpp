#include "relaytrace/analytics.hpp"

#include <algorithm>
#include <locale>
#include <numeric>
#include <set>
#include <stdexcept>

#include "relaytrace/errors.hpp"

namespace relaytrace {

void EntityAggregate::add(Label label, Timestamp at) {
  if (label == Label::Clean) {
    ++clean_count;
    return;
  }
  ++phishing_count;
  if (!first_phishing_at || at < *first_phishing_at) first_phishing_at = at;
  if (!last_phishing_at || at > *last_phishing_at) last_phishing_at = at;
}

void EntityAggregate::merge(const EntityAggregate& other) {
  if (entity.empty()) entity = other.entity;
  if (period.empty()) period = other.period;
  phishing_count += other.phishing_count;
  clean_count += other.clean_count;
  if (other.first_phishing_at && (!first_phishing_at || *other.first_phishing_at < *first_phishing_at)) {
    first_phishing_at = other.first_phishing_at;
  }
  if (other.last_phishing_at && (!last_phishing_at || *other.last_phishing_at > *last_phishing_at)) {
    last_phishing_at = other.last_phishing_at;
  }
}

double probability_of_phishing(const EntityAggregate& agg) {
  const auto total = agg.total();
  if (total == 0) throw EmptyEntity("entity " + agg.entity + " has no emails");
  return static_cast<double>(agg.phishing_count) / static_cast<double>(total);
}

std::string_view to_string(ConcentrationCategory c) noexcept {
  switch (c) {
    case ConcentrationCategory::Low:
      return "low";
    case ConcentrationCategory::Medium:
      return "medium";
    case ConcentrationCategory::High:
      return "high";
    case ConcentrationCategory::InsufficientVolume:
      break;
  }
  return "insufficient_volume";
}

ConcentrationCategory classify_concentration(const EntityAggregate& agg,
                                             const ConcentrationThresholds& t) {
  const double p = probability_of_phishing(agg);
  if (p < t.medium_from) return ConcentrationCategory::Low;
  if (p < t.high_from) return ConcentrationCategory::Medium;
  return agg.phishing_count > t.min_high_phishing ? ConcentrationCategory::High
                                                  : ConcentrationCategory::InsufficientVolume;
}

// ---- campaigns ------------------------------------------------------------

namespace {

const std::ctype<wchar_t>* unicode_ctype() {
  static const std::locale loc = [] {
    for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
      try {
        return std::locale(name);
      } catch (const std::runtime_error&) {
      }
    }
    return std::locale::classic();
  }();
  return &std::use_facet<std::ctype<wchar_t>>(loc);
}

// Returns the decoded code point and advances `i`; -1 for an invalid sequence.
long decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = 0;
  long cp = 0;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return -1;
  }
  if (i + len > s.size()) {
    i = s.size();
    return -1;
  }
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      i += k;
      return -1;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

void encode_utf8(long cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

std::string normalize_subject(std::string_view subject) {
  std::string out;
  out.reserve(subject.size());
  std::size_t i = 0;
  while (i < subject.size()) {
    const long cp = decode_utf8(subject, i);
    if (cp < 0) continue;
    if (cp < 0x80) {
      const auto c = static_cast<char>(cp);
      if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z')) {
        out.push_back(c);
      } else if (c >= 'A' && c <= 'Z') {
        out.push_back(static_cast<char>(c - 'A' + 'a'));
      }
      continue;
    }
    const auto* ct = unicode_ctype();
    const auto wc = static_cast<wchar_t>(cp);
    if (ct->is(std::ctype_base::alnum, wc)) encode_utf8(static_cast<long>(ct->tolower(wc)), out);
  }
  return out;
}

std::string CampaignKey::key() const { return from_email + '\x1f' + normalized_subject; }

CampaignKey campaign_key(const EmailRecord& record) {
  return {record.from_email, normalize_subject(record.subject)};
}

// ---- rankings -------------------------------------------------------------

namespace {

std::vector<const EntityAggregate*> ranked(const std::vector<EntityAggregate>& aggs) {
  std::vector<const EntityAggregate*> order;
  order.reserve(aggs.size());
  for (const auto& a : aggs) order.push_back(&a);
  std::sort(order.begin(), order.end(), [](const EntityAggregate* x, const EntityAggregate* y) {
    if (x->phishing_count != y->phishing_count) return x->phishing_count > y->phishing_count;
    return x->entity < y->entity;
  });
  return order;
}

}  // namespace

std::vector<CurvePoint> cumulative_fraction_curve(const std::vector<EntityAggregate>& aggs,
                                                  CurveMeasure by) {
  if (aggs.empty()) throw EmptyEntity("empty entity set");
  const auto measure = [by](const EntityAggregate& a) {
    return by == CurveMeasure::Phishing ? a.phishing_count : a.clean_count;
  };
  std::uint64_t total = 0;
  for (const auto& a : aggs) total += measure(a);
  if (total == 0) throw EmptyEntity("entity set has zero total");

  std::vector<CurvePoint> out;
  out.reserve(aggs.size());
  std::uint64_t running = 0;
  std::size_t rank = 0;
  for (const auto* a : ranked(aggs)) {
    running += measure(*a);
    out.push_back({++rank, a->entity, measure(*a),
                   static_cast<double>(running) / static_cast<double>(total)});
  }
  return out;
}

std::vector<EntityAggregate> top_k_by_phishing(const std::vector<EntityAggregate>& aggs,
                                               std::size_t k) {
  std::vector<EntityAggregate> out;
  for (const auto* a : ranked(aggs)) {
    if (out.size() == k) break;
    out.push_back(*a);
  }
  return out;
}

std::vector<VennRegion> persistence_sets(const std::map<std::string, std::set<std::string>>& categorized,
                                         const std::vector<std::string>& periods) {
  if (periods.size() < 2) throw std::invalid_argument("persistence_sets needs at least two periods");
  if (periods.size() > 16) throw std::invalid_argument("persistence_sets supports at most 16 periods");

  static const std::set<std::string> kEmpty;
  std::map<std::string, unsigned> membership;
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const auto it = categorized.find(periods[i]);
    const auto& members = it == categorized.end() ? kEmpty : it->second;
    for (const auto& m : members) membership[m] |= 1u << i;
  }

  const unsigned n_regions = (1u << periods.size()) - 1;
  std::vector<VennRegion> out(n_regions);
  for (unsigned mask = 1; mask <= n_regions; ++mask) {
    for (std::size_t i = 0; i < periods.size(); ++i) {
      if (mask & (1u << i)) out[mask - 1].periods.push_back(periods[i]);
    }
  }
  for (const auto& [member, mask] : membership) ++out[mask - 1].count;
  return out;
}

std::chrono::seconds phishing_lifespan(const EntityAggregate& agg) {
  if (agg.phishing_count == 0 || !agg.first_phishing_at || !agg.last_phishing_at) {
    throw NoPhishing();
  }
  return *agg.last_phishing_at - *agg.first_phishing_at;
}

// ---- authentication -------------------------------------------------------

void AuthCounts::add(const AuthResults& auth) {
  ++total;
  const bool spf = auth.spf == AuthState::Pass;
  const bool dkim = auth.dkim == AuthState::Pass;
  spf_or_dkim += (spf || dkim) ? 1 : 0;
  spf_and_dkim += (spf && dkim) ? 1 : 0;
  dmarc += auth.dmarc == AuthState::Pass ? 1 : 0;
}

void AuthCounts::merge(const AuthCounts& o) {
  total += o.total;
  spf_or_dkim += o.spf_or_dkim;
  spf_and_dkim += o.spf_and_dkim;
  dmarc += o.dmarc;
}

AuthPassRates pass_rates(const AuthCounts& c) {
  if (c.total == 0) throw EmptyEntity("no records for authentication rates");
  const auto n = static_cast<double>(c.total);
  return {c.total, static_cast<double>(c.spf_or_dkim) / n, static_cast<double>(c.spf_and_dkim) / n,
          static_cast<double>(c.dmarc) / n};
}

AuthRatesByLabel auth_pass_rates(const std::vector<EmailRecord>& records) {
  if (records.empty()) throw EmptyEntity("no records for authentication rates");
  AuthCounts phishing, clean;
  for (const auto& r : records) (r.label == Label::Phishing ? phishing : clean).add(r.auth);
  AuthRatesByLabel out;
  if (phishing.total) out.phishing = pass_rates(phishing);
  if (clean.total) out.clean = pass_rates(clean);
  return out;
}

// ---- derived facts and cohorts --------------------------------------------

RecordFacts derive_facts(const EmailRecord& record, const RelayPath& path, const AsnTable* asn,
                         const GeoLookup& geo) {
  RecordFacts f;
  f.message_id = record.message_id;
  f.period = month_label(record.delivered_at);
  f.delivered_at = record.delivered_at;
  f.label = record.label;
  f.org_id = record.org_id;
  f.recipient_domain = record.recipient_domain;
  f.origin_ip = path.origin_ip;
  if (path.origin_ip) {
    if (asn) {
      if (const auto* info = asn->lookup(*path.origin_ip)) f.origin_asn = info->asn;
    }
    f.origin_country = geo.country(*path.origin_ip);
  }
  const auto route = country_route(path, geo);
  f.route = route_key(route);
  f.distinct_countries = std::set<std::string>(route.countries.begin(), route.countries.end()).size();
  f.path_length = path.length;
  f.campaign = campaign_key(record);
  f.auth = record.auth;
  return f;
}

CohortOverlap cohort_overlap(const std::vector<RecordFacts>& records,
                             const std::map<std::string, bool>& prefilter,
                             const std::set<std::string>* comparison_orgs) {
  std::set<IpAddress> origins_no, origins_with;
  const auto cohort_of = [&](const RecordFacts& r) -> int {
    const auto it = prefilter.find(r.org_id);
    if (it == prefilter.end()) throw UnknownOrg(r.org_id);
    if (!it->second) return 0;
    if (comparison_orgs && !comparison_orgs->count(r.org_id)) return -1;
    return 1;
  };
  for (const auto& r : records) {
    const int c = cohort_of(r);
    if (r.label != Label::Phishing || !r.origin_ip || c < 0) continue;
    (c == 0 ? origins_no : origins_with).insert(*r.origin_ip);
  }
  CohortOverlap out;
  for (const auto& r : records) {
    const int c = cohort_of(r);
    if (r.label != Label::Phishing || c < 0) continue;
    auto& counts = c == 0 ? out.no_prefilter : out.with_prefilter;
    if (!r.origin_ip) {
      ++counts.no_origin;
      continue;
    }
    const auto& other = c == 0 ? origins_with : origins_no;
    (other.count(*r.origin_ip) ? counts.shared : counts.unique) += 1;
  }
  return out;
}

// ---- geography ------------------------------------------------------------

std::vector<CountryProbability> country_probability_table(const AggregateMap& by_country,
                                                          std::uint64_t min_total) {
  std::vector<CountryProbability> out;
  for (const auto& [cc, agg] : by_country) {
    if (agg.total() <= min_total) continue;
    out.push_back({cc, agg.phishing_count, agg.clean_count, probability_of_phishing(agg)});
  }
  return out;
}

std::map<std::size_t, LabelCounts> distinct_country_histogram(const std::vector<RecordFacts>& records) {
  std::map<std::size_t, LabelCounts> hist;
  for (const auto& r : records) hist[r.distinct_countries].add(r.label);
  return hist;
}

std::vector<YoyPoint> yoy_scatter(const AggregateMap& a, const AggregateMap& b,
                                  std::uint64_t min_phishing) {
  std::set<std::string> keys;
  for (const auto& [k, v] : a) keys.insert(k);
  for (const auto& [k, v] : b) keys.insert(k);
  std::vector<YoyPoint> out;
  for (const auto& k : keys) {
    const auto ia = a.find(k);
    const auto ib = b.find(k);
    YoyPoint p;
    p.asn = k;
    if (ia != a.end()) {
      p.phishing_a = ia->second.phishing_count;
      if (ia->second.total()) p.prob_a = probability_of_phishing(ia->second);
    }
    if (ib != b.end()) {
      p.phishing_b = ib->second.phishing_count;
      if (ib->second.total()) p.prob_b = probability_of_phishing(ib->second);
    }
    if (p.phishing_a >= min_phishing || p.phishing_b >= min_phishing) out.push_back(std::move(p));
  }
  return out;
}

// ---- period reduction -----------------------------------------------------

namespace {

void bump(AggregateMap& map, const std::string& key, const RecordFacts& f) {
  auto [it, inserted] = map.try_emplace(key);
  if (inserted) {
    it->second.entity = key;
    it->second.period = f.period;
  }
  it->second.add(f.label, f.delivered_at);
}

void merge_map(AggregateMap& into, const AggregateMap& from) {
  for (const auto& [k, v] : from) into[k].merge(v);
}

template <typename K, typename V>
void merge_hist(std::map<K, V>& into, const std::map<K, V>& from) {
  for (const auto& [k, v] : from) into[k].merge(v);
}

}  // namespace

void PeriodStats::add(const RecordFacts& f) {
  totals.add(f.label);
  (f.label == Label::Phishing ? auth_phishing : auth_clean).add(f.auth);
  path_length_hist[f.path_length].add(f.label);
  distinct_country_hist[f.distinct_countries].add(f.label);
  if (f.label == Label::Phishing) bump(by_campaign, f.campaign.key(), f);
  if (!f.route.empty()) bump(by_route, f.route, f);
  if (!f.origin_ip) {
    no_origin.add(f.label);
    return;
  }
  bump(by_ip, f.origin_ip->to_string(), f);
  if (f.origin_asn) bump(by_asn, std::to_string(*f.origin_asn), f);
  if (f.origin_country) bump(by_country, *f.origin_country, f);
}

void PeriodStats::merge(const PeriodStats& o) {
  merge_map(by_ip, o.by_ip);
  merge_map(by_asn, o.by_asn);
  merge_map(by_country, o.by_country);
  merge_map(by_route, o.by_route);
  merge_map(by_campaign, o.by_campaign);
  auth_phishing.merge(o.auth_phishing);
  auth_clean.merge(o.auth_clean);
  merge_hist(path_length_hist, o.path_length_hist);
  merge_hist(distinct_country_hist, o.distinct_country_hist);
  totals.merge(o.totals);
  no_origin.merge(o.no_origin);
}

void Aggregator::add(const RecordFacts& facts) {
  auto it = periods_.find(facts.period);
  if (it == periods_.end()) it = periods_.emplace(facts.period, PeriodStats{}).first;
  it->second.add(facts);
}

void Aggregator::merge(const Aggregator& other) {
  for (const auto& [label, stats] : other.periods_) {
    auto it = periods_.find(label);
    if (it == periods_.end()) it = periods_.emplace(label, PeriodStats{}).first;
    it->second.merge(stats);
  }
}

const PeriodStats* Aggregator::period(std::string_view label) const {
  const auto it = periods_.find(label);
  return it == periods_.end() ? nullptr : &it->second;
}

std::vector<std::string> Aggregator::period_labels() const {
  std::vector<std::string> out;
  for (const auto& [label, stats] : periods_) out.push_back(label);
  return out;
}

std::vector<EntityAggregate> values(const AggregateMap& map) {
  std::vector<EntityAggregate> out;
  out.reserve(map.size());
  for (const auto& [k, v] : map) out.push_back(v);
  return out;
}

}  // namespace relaytrace
