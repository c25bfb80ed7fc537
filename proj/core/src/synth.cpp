#include "relaytrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "relaytrace/csv.hpp"
#include "relaytrace/errors.hpp"

namespace relaytrace {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Infrastructure networks shared by every scenario.
constexpr std::uint32_t kO365Asn = 8075;
constexpr std::uint32_t kFilterAsn = 64600;
constexpr std::uint32_t kRelayAsn = 64700;
constexpr std::uint32_t kForgeryAsn = 64800;
constexpr int kMxPool = 4;
constexpr int kRelayHosts = 16;
constexpr int kForgeryHosts = 256;
constexpr int kSameAsRelayHosts = 4;
constexpr int kSameAsFakeHosts = 8;
constexpr std::uint64_t kMaxRecords = 5'000'000;

constexpr std::pair<ArchetypeKind, std::string_view> kKindNames[] = {
    {ArchetypeKind::PersistentHighConcentration, "PersistentHighConcentration"},
    {ArchetypeKind::BurstSender, "BurstSender"},
    {ArchetypeKind::CompromisedAccount, "CompromisedAccount"},
    {ArchetypeKind::LowConcentrationCloud, "LowConcentrationCloud"},
    {ArchetypeKind::BenignBackground, "BenignBackground"},
};

// std:: distributions are implementation-defined; these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return p > 0.0 && unit() < p; }
  // Skewed toward low indices, for heavy-tailed per-IP volumes.
  std::uint64_t skewed(std::uint64_t n) {
    const double u = unit();
    return std::min<std::uint64_t>(n - 1, static_cast<std::uint64_t>(static_cast<double>(n) * u * u));
  }

 private:
  std::mt19937_64 engine_;
};

std::string dotted(const IpAddress& ip) { return ip.to_string(); }

class AddressPlan {
 public:
  // One /16 per AS, in first-use order.
  std::size_t block_for(std::uint32_t asn, const std::string& owner, const std::string& country,
                        const std::string& tag) {
    if (auto it = index_.find(asn); it != index_.end()) return it->second;
    const std::size_t i = blocks_.size();
    if (i >= 80 * 256) throw InvalidSpec("too many distinct ASes");
    Block b;
    b.base = (static_cast<std::uint32_t>(20 + i / 256) << 24) | (static_cast<std::uint32_t>(i % 256) << 16);
    b.asn = asn;
    b.owner = owner;
    b.country = country;
    b.tag = tag;
    blocks_.push_back(b);
    index_[asn] = i;
    return i;
  }

  std::vector<IpAddress> hosts(std::size_t block, std::uint32_t n) {
    auto& b = blocks_[block];
    if (b.next + n > 254u * 256u) throw InvalidSpec("AS " + std::to_string(b.asn) + " needs more than a /16");
    std::vector<IpAddress> out;
    out.reserve(n);
    for (std::uint32_t k = 0; k < n; ++k, ++b.next) {
      out.push_back(IpAddress::v4(b.base | ((b.next / 254) << 8) | (b.next % 254 + 1)));
    }
    return out;
  }

  void emit(GeneratedScenario& out) const {
    for (const auto& b : blocks_) {
      const Cidr cidr{IpAddress::v4(b.base), 16};
      out.asn_rows.emplace_back(cidr, AsnInfo{b.asn, b.owner});
      out.geo_rows.emplace_back(cidr, b.country);
      if (!b.tag.empty()) out.provider_rows.emplace_back(cidr, b.tag);
    }
  }

 private:
  struct Block {
    std::uint32_t base = 0;
    std::uint32_t asn = 0;
    std::string owner;
    std::string country;
    std::string tag;
    std::uint32_t next = 0;
  };
  std::vector<Block> blocks_;
  std::map<std::uint32_t, std::size_t> index_;
};

struct Hop {
  std::string from_host;
  std::optional<IpAddress> from_ip;
  std::string by_host;
  std::optional<IpAddress> by_ip;
};

std::string host_for(const IpAddress& ip, std::string_view domain) {
  auto s = ip.to_string();
  std::replace(s.begin(), s.end(), '.', '-');
  return "h" + s + "." + std::string(domain);
}

std::string received_value(const Hop& h, Timestamp at, std::uint64_t id) {
  std::string v = "from " + h.from_host;
  if (h.from_ip) v += " (" + h.from_host + " [" + dotted(*h.from_ip) + "])";
  v += " by " + h.by_host;
  if (h.by_ip) v += " (" + dotted(*h.by_ip) + ")";
  char idbuf[32];
  std::snprintf(idbuf, sizeof idbuf, "%012llx", static_cast<unsigned long long>(id));
  v += " with ESMTPS id ";
  v += idbuf;
  v += "; " + format_rfc5322_date(at);
  return v;
}

struct ArchetypeRuntime {
  const ArchetypeSpec* spec;
  std::string name;
  std::string domain;
  std::vector<IpAddress> ips;
  std::vector<IpAddress> same_as_relays;
  std::vector<IpAddress> same_as_fakes;
  std::vector<Day> days;  // allowed activity days
  std::uint64_t first_campaign = 0;
};

struct Org {
  std::string id;
  std::string domain;
  bool prefilter = false;
  std::vector<IpAddress> mx;
};

struct Pending {
  EmailRecord record;
  TruthRow truth;
  std::uint64_t seq = 0;
};

constexpr std::string_view kTopics[] = {"invoice", "payroll", "password", "parcel",  "voicemail",
                                        "refund",  "account", "document", "security", "shipment"};

std::string campaign_subject(std::uint64_t c, std::uint64_t variant) {
  const auto topic = std::string(kTopics[c % std::size(kTopics)]);
  std::string upper = topic;
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  const auto n = std::to_string(c);
  switch (variant % 3) {
    case 0:
      return topic + " #" + n + " action required!";
    case 1:
      return upper + " " + n + " Action Required";
    default:
      return topic + ": " + n + " - action, required...";
  }
}

Timestamp uniform_in_day(Rng& rng, Day d) {
  return Timestamp{d} + std::chrono::seconds{static_cast<std::int64_t>(rng.below(86400))};
}

AuthResults sample_auth(Rng& rng, Label label) {
  const bool phish = label == Label::Phishing;
  const auto pick = [&](double p) { return rng.chance(p) ? AuthState::Pass : (rng.chance(0.5) ? AuthState::Fail : AuthState::None); };
  AuthResults a;
  a.spf = pick(phish ? 0.35 : 0.6);
  a.dkim = pick(phish ? 0.2 : 0.5);
  a.dmarc = pick(phish ? 0.1 : 0.35);
  return a;
}

Day parse_day_field(const json& v, const char* field) {
  if (!v.is_string()) throw InvalidSpec(std::string(field) + ": expected YYYY-MM-DD");
  auto d = parse_date(v.get<std::string>());
  if (!d) throw InvalidSpec(std::string(field) + ": expected YYYY-MM-DD");
  return *d;
}

Timestamp parse_ts_field(const json& v, const std::string& field) {
  if (!v.is_string()) throw InvalidSpec(field + ": expected YYYY-MM-DDTHH:MM:SSZ");
  auto t = parse_iso8601_utc(v.get<std::string>());
  if (!t) throw InvalidSpec(field + ": expected YYYY-MM-DDTHH:MM:SSZ");
  return *t;
}

template <typename T>
T get_num(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj[key];
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw InvalidSpec(where + key + ": expected a number");
    return v.get<T>();
  } else {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw InvalidSpec(where + key + ": expected a non-negative integer");
    }
    return static_cast<T>(v.get<unsigned long long>());
  }
}

std::string get_str(const json& obj, const char* key, std::string fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) throw InvalidSpec(where + key + ": expected a string");
  return obj[key].get<std::string>();
}

}  // namespace

std::string_view to_string(ArchetypeKind k) noexcept {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "BenignBackground";
}

std::optional<ArchetypeKind> parse_archetype_kind(std::string_view s) noexcept {
  for (const auto& [kind, name] : kKindNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(ForgeryKind k) noexcept {
  switch (k) {
    case ForgeryKind::SameAs:
      return "same_as";
    case ForgeryKind::CrossAs:
      return "cross_as";
    case ForgeryKind::None:
      break;
  }
  return "none";
}

ScenarioSpec parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidSpec(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InvalidSpec("scenario must be a JSON object");
  ScenarioSpec spec;
  if (!doc.contains("start") || !doc.contains("end")) throw InvalidSpec("start and end are required");
  spec.seed = get_num<std::uint64_t>(doc, "seed", spec.seed, "");
  spec.start = parse_day_field(doc["start"], "start");
  spec.end = parse_day_field(doc["end"], "end");
  spec.organizations = get_num<std::uint32_t>(doc, "organizations", spec.organizations, "");
  spec.prefilter_share = get_num<double>(doc, "prefilter_share", spec.prefilter_share, "");
  spec.forged_fraction = get_num<double>(doc, "forged_fraction", spec.forged_fraction, "");
  spec.same_as_forgery_share = get_num<double>(doc, "same_as_forgery_share", spec.same_as_forgery_share, "");
  spec.private_hop_share = get_num<double>(doc, "private_hop_share", spec.private_hop_share, "");
  spec.same_as_relay_share = get_num<double>(doc, "same_as_relay_share", spec.same_as_relay_share, "");
  spec.internal_clean = get_num<std::uint64_t>(doc, "internal_clean", spec.internal_clean, "");

  if (!doc.contains("archetypes") || !doc["archetypes"].is_array()) {
    throw InvalidSpec("archetypes: expected an array");
  }
  std::size_t idx = 0;
  for (const auto& a : doc["archetypes"]) {
    const auto where = "archetypes[" + std::to_string(idx++) + "].";
    if (!a.is_object()) throw InvalidSpec(where + ": expected an object");
    ArchetypeSpec s;
    const auto kind = parse_archetype_kind(get_str(a, "kind", "", where));
    if (!kind) throw InvalidSpec(where + "kind: unknown archetype kind");
    s.kind = *kind;
    s.name = get_str(a, "name", "", where);
    s.asn = get_num<std::uint32_t>(a, "asn", 0, where);
    s.owner = get_str(a, "owner", "", where);
    s.country = get_str(a, "country", s.country, where);
    s.provider_tag = get_str(a, "provider_tag", "", where);
    s.ip_count = get_num<std::uint32_t>(a, "ip_count", s.ip_count, where);
    s.phishing = get_num<std::uint64_t>(a, "phishing", 0, where);
    s.clean = get_num<std::uint64_t>(a, "clean", 0, where);
    s.campaigns = get_num<std::uint32_t>(a, "campaigns", s.campaigns, where);
    s.relay_share = get_num<double>(a, "relay_share", 0.0, where);
    s.active_days = get_num<std::int64_t>(a, "active_days", s.active_days, where);
    if (a.contains("active_start")) s.active_start = parse_ts_field(a["active_start"], where + "active_start");
    if (a.contains("months")) {
      if (!a["months"].is_array()) throw InvalidSpec(where + "months: expected an array");
      for (const auto& m : a["months"]) {
        if (!m.is_string()) throw InvalidSpec(where + "months: expected strings");
        s.months.push_back(m.get<std::string>());
      }
    }
    if (a.contains("bursts")) {
      if (!a["bursts"].is_array()) throw InvalidSpec(where + "bursts: expected an array");
      std::size_t b = 0;
      for (const auto& bj : a["bursts"]) {
        const auto bw = where + "bursts[" + std::to_string(b++) + "].";
        if (!bj.is_object() || !bj.contains("start")) throw InvalidSpec(bw + "start: required");
        Burst burst;
        burst.start = parse_ts_field(bj["start"], bw + "start");
        burst.minutes = get_num<std::int64_t>(bj, "minutes", burst.minutes, bw);
        s.bursts.push_back(burst);
      }
    }
    spec.archetypes.push_back(std::move(s));
  }
  validate_scenario(spec);
  return spec;
}

ScenarioSpec load_scenario(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

void validate_scenario(const ScenarioSpec& spec) {
  if (spec.end < spec.start) throw InvalidSpec("date range is empty");
  if (spec.organizations < 1 || spec.organizations > 10000) throw InvalidSpec("organizations: must be in [1, 10000]");
  const auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidSpec(std::string(name) + ": must be in [0, 1]");
  };
  fraction(spec.prefilter_share, "prefilter_share");
  fraction(spec.forged_fraction, "forged_fraction");
  fraction(spec.same_as_forgery_share, "same_as_forgery_share");
  fraction(spec.private_hop_share, "private_hop_share");
  fraction(spec.same_as_relay_share, "same_as_relay_share");
  const auto n_filter = static_cast<std::uint32_t>(std::lround(spec.organizations * spec.prefilter_share));
  if (spec.internal_clean > 0 && n_filter >= spec.organizations) {
    throw InvalidSpec("internal_clean needs at least one organization without a pre-filter");
  }

  std::uint64_t total = spec.internal_clean;
  std::set<std::string> names;
  for (std::size_t i = 0; i < spec.archetypes.size(); ++i) {
    const auto& a = spec.archetypes[i];
    const auto where = "archetypes[" + std::to_string(i) + "]: ";
    if (a.asn == 0) throw InvalidSpec(where + "asn is required");
    if (a.asn == kRelayAsn || a.asn == kForgeryAsn) {
      throw InvalidSpec(where + "asn " + std::to_string(a.asn) + " is reserved for scenario infrastructure");
    }
    if (a.country.size() != 2 || !std::isalpha(static_cast<unsigned char>(a.country[0])) ||
        !std::isalpha(static_cast<unsigned char>(a.country[1]))) {
      throw InvalidSpec(where + "country must be a two-letter code");
    }
    if (a.ip_count < 1) throw InvalidSpec(where + "ip_count must be >= 1");
    if (a.phishing > 0 && a.campaigns < 1) throw InvalidSpec(where + "campaigns must be >= 1");
    fraction(a.relay_share, "relay_share");
    if (a.kind == ArchetypeKind::BurstSender && a.phishing > 0 && a.bursts.empty()) {
      throw InvalidSpec(where + "BurstSender needs at least one burst");
    }
    for (const auto& b : a.bursts) {
      if (b.minutes < 1) throw InvalidSpec(where + "burst minutes must be >= 1");
      if (utc_day(b.start) < spec.start || utc_day(b.start + std::chrono::minutes{b.minutes} - std::chrono::seconds{1}) > spec.end) {
        throw InvalidSpec(where + "burst outside the date range");
      }
    }
    if (a.kind == ArchetypeKind::CompromisedAccount) {
      if (a.active_days < 1) throw InvalidSpec(where + "active_days must be >= 1");
      const auto s = a.active_start.value_or(Timestamp{spec.start});
      if (utc_day(s) < spec.start || utc_day(s) > spec.end) throw InvalidSpec(where + "active_start outside the date range");
    }
    for (const auto& m : a.months) {
      if (m.size() != 7 || m[4] != '-' || !parse_date(m + "-01")) throw InvalidSpec(where + "bad month '" + m + "'");
    }
    if (!a.name.empty() && !names.insert(a.name).second) throw InvalidSpec(where + "duplicate name " + a.name);
    total += a.phishing + a.clean;
  }
  if (total > kMaxRecords) throw InvalidSpec("scenario exceeds " + std::to_string(kMaxRecords) + " records");
}

AsnTable GeneratedScenario::asn_table() const {
  AsnTable t;
  for (const auto& [c, info] : asn_rows) t.insert(c, info);
  return t;
}

GeoTable GeneratedScenario::geo_table() const {
  GeoTable t;
  for (const auto& [c, cc] : geo_rows) t.insert(c, cc);
  return t;
}

ProviderTable GeneratedScenario::provider_table() const {
  ProviderTable t;
  for (const auto& [c, tag] : provider_rows) t.insert(c, tag);
  return t;
}

MxSnapshot GeneratedScenario::mx_snapshot() const {
  MxSnapshot s;
  for (const auto& row : mx_rows) s.add(row.domain, row.date, row.ip);
  return s;
}

GeneratedScenario generate(const ScenarioSpec& spec) {
  validate_scenario(spec);
  Rng rng(spec.seed);
  AddressPlan plan;
  GeneratedScenario out;

  // Recipient side: O365 and filter MX pools, then the relay and forgery networks.
  const auto o365_block = plan.block_for(kO365Asn, "Microsoft", "US", "o365");
  const auto o365_mx = plan.hosts(o365_block, kMxPool);
  const auto filter_block = plan.block_for(kFilterAsn, "MailFilter", "US", "prefilter");
  const auto filter_mx = plan.hosts(filter_block, kMxPool);
  const auto relay_hosts = plan.hosts(plan.block_for(kRelayAsn, "RelayCo", "DE", "relay"), kRelayHosts);
  const auto forgery_hosts = plan.hosts(plan.block_for(kForgeryAsn, "Unrelated", "NL", ""), kForgeryHosts);

  std::vector<Org> orgs;
  const auto n_filter = static_cast<std::uint32_t>(std::lround(spec.organizations * spec.prefilter_share));
  for (std::uint32_t i = 0; i < spec.organizations; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "org%04u", i + 1);
    Org o;
    o.id = id;
    o.domain = std::string(id) + ".example";
    o.prefilter = i < n_filter;
    const auto& pool = o.prefilter ? filter_mx : o365_mx;
    o.mx = {pool[i % kMxPool], pool[(i + 1) % kMxPool]};
    for (const auto& ip : o.mx) out.mx_rows.push_back({o.domain, spec.start, ip});
    orgs.push_back(std::move(o));
  }
  std::vector<std::size_t> o365_orgs;
  for (std::size_t i = 0; i < orgs.size(); ++i) {
    if (!orgs[i].prefilter) o365_orgs.push_back(i);
  }

  std::vector<Day> all_days;
  for (Day d = spec.start; d <= spec.end; d += std::chrono::days{1}) all_days.push_back(d);

  std::vector<ArchetypeRuntime> runtimes;
  std::uint64_t next_campaign = 0;
  for (std::size_t i = 0; i < spec.archetypes.size(); ++i) {
    const auto& a = spec.archetypes[i];
    ArchetypeRuntime rt;
    rt.spec = &a;
    rt.name = a.name.empty() ? std::string(to_string(a.kind)) + "-" + std::to_string(i) : a.name;
    rt.domain = "as" + std::to_string(a.asn) + ".test";
    const auto owner = a.owner.empty() ? "AS" + std::to_string(a.asn) : a.owner;
    std::string cc = a.country;
    for (auto& ch : cc) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    const auto block = plan.block_for(a.asn, owner, cc, a.provider_tag);
    rt.ips = plan.hosts(block, a.ip_count);
    rt.same_as_relays = plan.hosts(block, kSameAsRelayHosts);
    rt.same_as_fakes = plan.hosts(block, kSameAsFakeHosts);
    for (const auto d : all_days) {
      const auto label = month_label(Timestamp{d});
      if (a.months.empty() || std::find(a.months.begin(), a.months.end(), label) != a.months.end()) {
        rt.days.push_back(d);
      }
    }
    if (rt.days.empty() && a.phishing + a.clean > 0) throw InvalidSpec(rt.name + ": no active days in range");
    rt.first_campaign = next_campaign;
    next_campaign += a.campaigns;
    runtimes.push_back(std::move(rt));
  }
  plan.emit(out);

  std::vector<Pending> pending;
  std::uint64_t seq = 0;
  std::uint32_t internal_counter = 0;

  const auto internal_ip = [&]() {
    ++internal_counter;
    return IpAddress::v4((10u << 24) | ((internal_counter % 250 + 1) << 8) | ((internal_counter / 250) % 250 + 1));
  };

  const auto finish = [&](Pending& p, std::vector<Hop> hops, Timestamp at) {
    // hops earliest first; headers are newest first.
    const auto n = hops.size();
    for (std::size_t k = n; k-- > 0;) {
      const auto hop_time = at - std::chrono::seconds{static_cast<std::int64_t>(2 * (n - 1 - k))};
      p.record.raw_headers.push_back({"Received", received_value(hops[k], hop_time, seq * 8 + k)});
    }
    p.record.delivered_at = at;
    p.seq = seq++;
    pending.push_back(std::move(p));
  };

  for (const auto& rt : runtimes) {
    const auto& a = *rt.spec;
    const auto emit_one = [&](Label label) {
      Pending p;
      auto& r = p.record;
      r.label = label;
      const auto& org = orgs[rng.below(orgs.size())];
      r.org_id = org.id;
      r.recipient_domain = org.domain;
      const auto mx_ip = org.mx[rng.below(org.mx.size())];

      Timestamp at;
      if (label == Label::Phishing && a.kind == ArchetypeKind::BurstSender) {
        const auto& b = a.bursts[rng.below(a.bursts.size())];
        at = b.start + std::chrono::seconds{static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(b.minutes) * 60))};
      } else if (label == Label::Phishing && a.kind == ArchetypeKind::CompromisedAccount) {
        const auto s = a.active_start.value_or(Timestamp{spec.start});
        auto span = static_cast<std::uint64_t>(a.active_days) * 86400;
        const auto limit = Timestamp{spec.end + std::chrono::days{1}} - s;
        span = std::min<std::uint64_t>(span, static_cast<std::uint64_t>(limit.count()));
        at = s + std::chrono::seconds{static_cast<std::int64_t>(rng.below(span))};
      } else {
        at = uniform_in_day(rng, rt.days[rng.below(rt.days.size())]);
      }

      const auto sender = rt.ips[rng.skewed(rt.ips.size())];
      if (label == Label::Phishing) {
        // Heavy-tailed campaign sizes.
        const auto c = rt.first_campaign + rng.skewed(a.campaigns);
        r.from_email = "notice" + std::to_string(c) + "@" + rt.domain;
        r.subject = campaign_subject(c, rng.below(3));
      } else {
        r.from_email = "user" + std::to_string(rng.below(50)) + "@" + rt.domain;
        r.subject = "Weekly update " + std::to_string(rng.below(1000));
      }
      r.mail_from = r.from_email;
      r.auth = sample_auth(rng, label);

      p.truth.archetype = rt.name;
      p.truth.kind = a.kind;
      p.truth.label = label;
      p.truth.origin_ip = sender.to_string();

      std::vector<Hop> hops;
      if (label == Label::Phishing && rng.chance(spec.forged_fraction)) {
        const bool same = rng.chance(spec.same_as_forgery_share);
        p.truth.forgery = same ? ForgeryKind::SameAs : ForgeryKind::CrossAs;
        const auto& pool = same ? rt.same_as_fakes : forgery_hosts;
        const auto fake1 = pool[rng.below(pool.size())];
        if (rng.chance(0.5)) {
          const auto fake0 = pool[rng.below(pool.size())];
          hops.push_back({host_for(fake0, "forged.test"), fake0, host_for(fake1, "forged.test"), fake1});
        }
        hops.push_back({host_for(fake1, "forged.test"), fake1, host_for(sender, rt.domain), sender});
      } else if (rng.chance(spec.private_hop_share)) {
        const auto lan = IpAddress::v4((192u << 24) | (168u << 16) | (static_cast<std::uint32_t>(rng.below(255)) << 8) |
                                       (static_cast<std::uint32_t>(rng.below(254)) + 1));
        hops.push_back({"workstation.local", lan, host_for(sender, rt.domain), sender});
      }

      IpAddress current = sender;
      std::string current_host = host_for(sender, rt.domain);
      if (rng.chance(spec.same_as_relay_share)) {
        const auto relay = rt.same_as_relays[rng.below(rt.same_as_relays.size())];
        hops.push_back({current_host, current, host_for(relay, rt.domain), relay});
        current = relay;
        current_host = host_for(relay, rt.domain);
      }
      if (label == Label::Clean && rng.chance(a.relay_share)) {
        const auto relay = relay_hosts[rng.below(relay_hosts.size())];
        hops.push_back({current_host, current, host_for(relay, "relayco.test"), relay});
        current = relay;
        current_host = host_for(relay, "relayco.test");
      }
      const auto mx_host = host_for(mx_ip, org.prefilter ? "filter.test" : "protection.outlook.test");
      hops.push_back({current_host, current, mx_host, mx_ip});
      hops.push_back({mx_host, mx_ip, "store." + org.domain, internal_ip()});
      finish(p, std::move(hops), at);
    };
    for (std::uint64_t k = 0; k < a.phishing; ++k) emit_one(Label::Phishing);
    for (std::uint64_t k = 0; k < a.clean; ++k) emit_one(Label::Clean);
  }

  for (std::uint64_t k = 0; k < spec.internal_clean; ++k) {
    Pending p;
    auto& r = p.record;
    r.label = Label::Clean;
    const auto& org = orgs[o365_orgs[rng.below(o365_orgs.size())]];
    r.org_id = org.id;
    r.recipient_domain = org.domain;
    const auto mx_ip = org.mx[rng.below(org.mx.size())];
    r.from_email = "colleague" + std::to_string(rng.below(50)) + "@" + org.domain;
    r.mail_from = r.from_email;
    r.subject = "Internal note " + std::to_string(rng.below(1000));
    r.auth = sample_auth(rng, Label::Clean);
    const auto at = uniform_in_day(rng, all_days[rng.below(all_days.size())]);
    p.truth.archetype = "internal";
    p.truth.internal = true;
    p.truth.label = Label::Clean;
    p.truth.origin_ip = mx_ip.to_string();
    std::vector<Hop> hops{{host_for(mx_ip, "protection.outlook.test"), mx_ip, "store." + org.domain, internal_ip()}};
    finish(p, std::move(hops), at);
  }

  std::sort(pending.begin(), pending.end(), [](const Pending& x, const Pending& y) {
    return std::tie(x.record.delivered_at, x.seq) < std::tie(y.record.delivered_at, y.seq);
  });
  out.records.reserve(pending.size());
  out.truth.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    char id[40];
    std::snprintf(id, sizeof id, "<m%08zu@synth.test>", i + 1);
    pending[i].record.message_id = id;
    pending[i].truth.message_id = id;
    out.records.push_back(std::move(pending[i].record));
    out.truth.push_back(std::move(pending[i].truth));
  }
  return out;
}

void write_scenario(const GeneratedScenario& sc, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("corpus.jsonl");
    for (const auto& r : sc.records) f << serialize_record(r) << '\n';
  }
  {
    auto f = open("truth.tsv");
    f << "message_id\tarchetype\tkind\tlabel\tforgery\torigin_ip\n";
    for (const auto& t : sc.truth) {
      f << t.message_id << '\t' << t.archetype << '\t' << (t.internal ? "Internal" : to_string(t.kind)) << '\t'
        << to_string(t.label) << '\t' << to_string(t.forgery) << '\t' << t.origin_ip << '\n';
    }
  }
  {
    auto f = open("asn.csv");
    f << "prefix,asn,owner\n";
    for (const auto& [c, info] : sc.asn_rows) f << c.to_string() << ',' << info.asn << ',' << csv::escape(info.owner) << '\n';
  }
  {
    auto f = open("geo.csv");
    f << "prefix,country\n";
    for (const auto& [c, cc] : sc.geo_rows) f << c.to_string() << ',' << cc << '\n';
  }
  {
    auto f = open("provider.csv");
    f << "prefix,tag\n";
    for (const auto& [c, tag] : sc.provider_rows) f << c.to_string() << ',' << tag << '\n';
  }
  {
    auto f = open("mx.csv");
    f << "domain,date,ip\n";
    for (const auto& m : sc.mx_rows) f << m.domain << ',' << format_date(m.date) << ',' << m.ip.to_string() << '\n';
  }
  {
    auto f = open("config.json");
    const json cfg = {{"corpus", {"corpus.jsonl"}},
                      {"tables", {{"asn", "asn.csv"}, {"geo", "geo.csv"}, {"provider", "provider.csv"}, {"mx", "mx.csv"}}},
                      {"output_dir", "reports"},
                      {"state_path", "detector.state"}};
    f << cfg.dump(2) << '\n';
  }
}

}  // namespace relaytrace
