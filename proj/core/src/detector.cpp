#include "relaytrace/detector.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "relaytrace/errors.hpp"

namespace relaytrace {

void DetectorParams::validate() const {
  if (window_days < 0 || window_days > 90) throw ConfigError("window_days", "must be in [0, 90]");
  if (min_phishing < 1) throw ConfigError("min_phishing", "must be >= 1");
  if (!(risk_threshold > 0.0 && risk_threshold <= 1.0)) {
    throw ConfigError("risk_threshold", "must be in (0, 1]");
  }
  if (!(smoothing >= 0.0)) throw ConfigError("smoothing", "must be >= 0");
}

std::int32_t day_number(Timestamp at) {
  return static_cast<std::int32_t>(utc_day(at).time_since_epoch().count());
}

WindowState::WindowState(int window_days) : window_days_(window_days) {
  if (window_days < 0 || window_days > 90) throw ConfigError("window_days", "must be in [0, 90]");
}

std::int32_t WindowState::window_start() const noexcept {
  return current_day_ ? *current_day_ - window_days_ + 1 : std::numeric_limits<std::int32_t>::min();
}

void WindowState::evict(std::vector<DayBucket>& buckets) const {
  const auto start = window_start();
  const auto keep = std::find_if(buckets.begin(), buckets.end(),
                                 [start](const DayBucket& b) { return b.day >= start; });
  buckets.erase(buckets.begin(), keep);
}

void WindowState::advance_to(std::int32_t day) {
  if (!current_day_ || day > *current_day_) current_day_ = day;
}

void WindowState::advance_to(Timestamp at) { advance_to(day_number(at)); }

EventOutcome WindowState::record_event(const IpAddress& ip, Timestamp at, Label label) {
  const auto day = day_number(at);
  advance_to(day);
  if (window_days_ == 0) return EventOutcome::Applied;  // nothing is retained
  if (day < window_start()) {
    ++stale_;
    return EventOutcome::Stale;
  }
  auto& buckets = buckets_[ip];
  evict(buckets);
  auto it = std::lower_bound(buckets.begin(), buckets.end(), day,
                             [](const DayBucket& b, std::int32_t d) { return b.day < d; });
  if (it == buckets.end() || it->day != day) it = buckets.insert(it, DayBucket{day, 0, 0});
  (label == Label::Phishing ? it->phishing : it->clean) += 1;
  return EventOutcome::Applied;
}

WindowCounts WindowState::window_counts(const IpAddress& ip) const {
  return current_day_ ? window_counts(ip, *current_day_) : WindowCounts{};
}

WindowCounts WindowState::window_counts(const IpAddress& ip, std::int32_t as_of) const {
  WindowCounts out;
  const auto it = buckets_.find(ip);
  if (it == buckets_.end() || window_days_ == 0) return out;
  const auto lo = std::max(as_of - window_days_ + 1, window_start());
  for (const auto& b : it->second) {
    if (b.day < lo || b.day > as_of) continue;
    out.phishing += b.phishing;
    out.clean += b.clean;
  }
  return out;
}

void WindowState::merge(const WindowState& other) {
  if (other.window_days_ != window_days_) {
    throw std::invalid_argument("cannot merge window states with different window sizes");
  }
  if (other.current_day_) advance_to(*other.current_day_);
  stale_ += other.stale_;
  for (const auto& [ip, theirs] : other.buckets_) {
    auto& mine = buckets_[ip];
    std::vector<DayBucket> merged;
    merged.reserve(mine.size() + theirs.size());
    auto a = mine.begin();
    auto b = theirs.begin();
    while (a != mine.end() || b != theirs.end()) {
      if (b == theirs.end() || (a != mine.end() && a->day < b->day)) {
        merged.push_back(*a++);
      } else if (a == mine.end() || b->day < a->day) {
        merged.push_back(*b++);
      } else {
        merged.push_back({a->day, a->phishing + b->phishing, a->clean + b->clean});
        ++a;
        ++b;
      }
    }
    mine = std::move(merged);
  }
  compact();
}

void WindowState::compact() {
  for (auto it = buckets_.begin(); it != buckets_.end();) {
    evict(it->second);
    if (window_days_ == 0) it->second.clear();
    it = it->second.empty() ? buckets_.erase(it) : std::next(it);
  }
}

std::vector<std::pair<IpAddress, std::vector<DayBucket>>> WindowState::snapshot() const {
  std::vector<std::pair<IpAddress, std::vector<DayBucket>>> out;
  out.reserve(buckets_.size());
  for (const auto& [ip, buckets] : buckets_) {
    auto kept = buckets;
    evict(kept);
    if (!kept.empty()) out.emplace_back(ip, std::move(kept));
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  return out;
}

bool operator==(const WindowState& a, const WindowState& b) {
  return a.window_days_ == b.window_days_ && a.current_day_ == b.current_day_ &&
         a.stale_ == b.stale_ && a.snapshot() == b.snapshot();
}

WindowState WindowState::from_parts(int window_days, std::optional<std::int32_t> current_day,
                                    std::uint64_t stale,
                                    std::vector<std::pair<IpAddress, std::vector<DayBucket>>> ips) {
  WindowState s(window_days);
  s.current_day_ = current_day;
  s.stale_ = stale;
  for (auto& [ip, buckets] : ips) s.buckets_[ip] = std::move(buckets);
  s.compact();
  return s;
}

std::string_view to_string(Decision d) noexcept { return d == Decision::Flag ? "Flag" : "Pass"; }

RiskScore risk_score(const WindowState& state, const IpAddress& ip, Timestamp at,
                     const DetectorParams& params) {
  const auto counts = state.window_counts(ip, day_number(at));
  RiskScore r;
  r.window_phishing = counts.phishing;
  r.window_clean = counts.clean;
  const double denom = static_cast<double>(counts.phishing) + static_cast<double>(counts.clean) +
                       params.smoothing;
  r.score = denom > 0.0 ? static_cast<double>(counts.phishing) / denom : 0.0;
  return r;
}

Decision decide(const RiskScore& score, const DetectorParams& params) {
  return score.window_phishing >= params.min_phishing && score.score >= params.risk_threshold
             ? Decision::Flag
             : Decision::Pass;
}

Decision classify(const WindowState& state, const IpAddress& ip, Timestamp at,
                  const DetectorParams& params) {
  return decide(risk_score(state, ip, at, params), params);
}

Detector::Detector(DetectorParams params) : Detector(params, WindowState(params.window_days)) {}

Detector::Detector(DetectorParams params, WindowState state)
    : params_(params), state_(std::move(state)) {
  params_.validate();
  if (state_.window_days() != params_.window_days) {
    throw ConfigError("window_days", "does not match the loaded detector state");
  }
}

Detector::Result Detector::process(const IpAddress& ip, Timestamp at, Label label) {
  state_.advance_to(at);
  Result r;
  r.score = risk_score(state_, ip, at, params_);
  r.decision = decide(r.score, params_);
  r.outcome = state_.record_event(ip, at, label);
  return r;
}

// ---- persistence ----------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "relaytrace-window-state";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(std::string("state file: bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const auto j = line.find(' ', i);
    const auto end = j == std::string_view::npos ? line.size() : j;
    if (end > i) out.push_back(line.substr(i, end - i));
    i = end + 1;
  }
  return out;
}

}  // namespace

std::string serialize_state(const WindowState& state) {
  const auto ips = state.snapshot();
  std::ostringstream body;
  body << kMagic << '\n';
  body << "version " << kStateFormatVersion << '\n';
  body << "window_days " << state.window_days() << '\n';
  if (state.current_day()) {
    body << "current_day " << *state.current_day() << '\n';
  } else {
    body << "current_day none\n";
  }
  body << "stale " << state.stale_count() << '\n';
  body << "ips " << ips.size() << '\n';
  for (const auto& [ip, buckets] : ips) {
    body << "ip " << ip.to_string() << ' ' << buckets.size();
    for (const auto& b : buckets) body << ' ' << b.day << ':' << b.phishing << ':' << b.clean;
    body << '\n';
  }
  std::string text = body.str();
  char sum[40];
  std::snprintf(sum, sizeof sum, "checksum %016llx\n",
                static_cast<unsigned long long>(fnv1a(text)));
  return text + sum;
}

WindowState parse_state(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t i = 0; i < text.size();) {
    const auto j = text.find('\n', i);
    if (j == std::string_view::npos) throw ParseError("state file: truncated (missing newline)");
    lines.push_back(text.substr(i, j - i));
    i = j + 1;
  }
  if (lines.empty() || lines[0] != kMagic) throw ParseError("state file: missing header");
  if (lines.size() < 2) throw ParseError("state file: missing version");
  {
    const auto f = fields(lines[1]);
    if (f.size() != 2 || f[0] != "version") throw ParseError("state file: missing version");
    const int version = parse_number<int>(f[1], "version");
    if (version != kStateFormatVersion) throw VersionMismatch(version, kStateFormatVersion);
  }

  const auto& last = lines.back();
  const auto lf = fields(last);
  if (lf.size() != 2 || lf[0] != "checksum") throw ParseError("state file: missing checksum");
  const auto body_len = static_cast<std::size_t>(last.data() - text.data());
  unsigned long long stored = 0;
  {
    auto [ptr, ec] = std::from_chars(lf[1].data(), lf[1].data() + lf[1].size(), stored, 16);
    if (ec != std::errc{} || ptr != lf[1].data() + lf[1].size()) {
      throw ParseError("state file: bad checksum");
    }
  }
  if (stored != fnv1a(text.substr(0, body_len))) throw ParseError("state file: checksum mismatch");

  const auto value = [&](std::size_t idx, std::string_view key) {
    if (idx >= lines.size() - 1) throw ParseError("state file: missing " + std::string(key));
    const auto f = fields(lines[idx]);
    if (f.size() != 2 || f[0] != key) throw ParseError("state file: expected " + std::string(key));
    return f[1];
  };
  const int window_days = parse_number<int>(value(2, "window_days"), "window_days");
  if (window_days < 0 || window_days > 90) throw ParseError("state file: window_days out of range");
  std::optional<std::int32_t> current_day;
  if (const auto cd = value(3, "current_day"); cd != "none") {
    current_day = parse_number<std::int32_t>(cd, "current_day");
  }
  const auto stale = parse_number<std::uint64_t>(value(4, "stale"), "stale");
  const auto n_ips = parse_number<std::size_t>(value(5, "ips"), "ips");
  if (lines.size() != 6 + n_ips + 1) throw ParseError("state file: ip count does not match");

  std::vector<std::pair<IpAddress, std::vector<DayBucket>>> ips;
  ips.reserve(n_ips);
  for (std::size_t k = 0; k < n_ips; ++k) {
    const auto f = fields(lines[6 + k]);
    if (f.size() < 3 || f[0] != "ip") throw ParseError("state file: bad ip line");
    auto ip = IpAddress::parse(f[1]);
    if (!ip) throw ParseError("state file: bad ip '" + std::string(f[1]) + "'");
    const auto n = parse_number<std::size_t>(f[2], "bucket count");
    if (f.size() != 3 + n) throw ParseError("state file: bucket count does not match");
    std::vector<DayBucket> buckets;
    for (std::size_t b = 0; b < n; ++b) {
      const auto tok = f[3 + b];
      const auto c1 = tok.find(':');
      const auto c2 = tok.find(':', c1 == std::string_view::npos ? c1 : c1 + 1);
      if (c1 == std::string_view::npos || c2 == std::string_view::npos) {
        throw ParseError("state file: bad bucket '" + std::string(tok) + "'");
      }
      DayBucket bucket;
      bucket.day = parse_number<std::int32_t>(tok.substr(0, c1), "bucket day");
      bucket.phishing = parse_number<std::uint32_t>(tok.substr(c1 + 1, c2 - c1 - 1), "bucket count");
      bucket.clean = parse_number<std::uint32_t>(tok.substr(c2 + 1), "bucket count");
      if (!buckets.empty() && bucket.day <= buckets.back().day) {
        throw ParseError("state file: buckets out of order");
      }
      buckets.push_back(bucket);
    }
    ips.emplace_back(*ip, std::move(buckets));
  }
  return WindowState::from_parts(window_days, current_day, stale, std::move(ips));
}

void save_state(const WindowState& state, const std::filesystem::path& path) {
  const auto text = serialize_state(state);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write state file " + tmp);
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write state file " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace state file " + path.string() + ": " + ec.message());
}

WindowState load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open state file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_state(buf.str());
}

// ---- features -------------------------------------------------------------

namespace {

struct ProbVolume {
  double probability = 0.0;
  double volume = 0.0;
};

ProbVolume lookup_pv(const AggregateMap& map, const std::string& key) {
  const auto it = map.find(key);
  if (it == map.end() || it->second.total() == 0) return {};
  return {probability_of_phishing(it->second), static_cast<double>(it->second.phishing_count)};
}

}  // namespace

std::array<double, 12> FeatureVector::values() const {
  return {ip_phishing_probability,   ip_phishing_volume, as_phishing_probability,
          as_phishing_volume,        country_phishing_probability,
          country_phishing_volume,   path_length,        distinct_countries,
          route_phishing_probability, spf_pass,          dkim_pass,
          dmarc_pass};
}

const std::array<std::string_view, 12>& FeatureVector::column_names() {
  static constexpr std::array<std::string_view, 12> kNames = {
      "ip_phishing_probability",    "ip_phishing_volume",     "as_phishing_probability",
      "as_phishing_volume",         "country_phishing_probability", "country_phishing_volume",
      "path_length",                "distinct_countries",     "route_phishing_probability",
      "spf_pass",                   "dkim_pass",              "dmarc_pass"};
  return kNames;
}

FeatureVector extract_features(const EmailRecord& record, const RelayPath& path,
                               const PeriodStats* aggregates, const GeoLookup& geo,
                               const AsnTable* asn) {
  FeatureVector fv;
  const auto facts = derive_facts(record, path, asn, geo);
  fv.path_length = static_cast<double>(facts.path_length);
  fv.distinct_countries = static_cast<double>(facts.distinct_countries);
  fv.spf_pass = record.auth.spf == AuthState::Pass ? 1.0 : 0.0;
  fv.dkim_pass = record.auth.dkim == AuthState::Pass ? 1.0 : 0.0;
  fv.dmarc_pass = record.auth.dmarc == AuthState::Pass ? 1.0 : 0.0;
  if (!aggregates) return fv;

  if (facts.origin_ip) {
    const auto pv = lookup_pv(aggregates->by_ip, facts.origin_ip->to_string());
    fv.ip_phishing_probability = pv.probability;
    fv.ip_phishing_volume = pv.volume;
  }
  if (facts.origin_asn) {
    const auto pv = lookup_pv(aggregates->by_asn, std::to_string(*facts.origin_asn));
    fv.as_phishing_probability = pv.probability;
    fv.as_phishing_volume = pv.volume;
  }
  if (facts.origin_country) {
    const auto pv = lookup_pv(aggregates->by_country, *facts.origin_country);
    fv.country_phishing_probability = pv.probability;
    fv.country_phishing_volume = pv.volume;
  }
  if (!facts.route.empty()) {
    fv.route_phishing_probability = lookup_pv(aggregates->by_route, facts.route).probability;
  }
  return fv;
}

}  // namespace relaytrace
