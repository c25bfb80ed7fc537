#include <fstream>
#include <random>

#include "doctest.h"
#include "relaytrace/detector.hpp"
#include "relaytrace/errors.hpp"
#include "support.hpp"

using namespace relaytrace;
using rt_test::ip;
using rt_test::ts;

namespace {

constexpr std::int64_t kDay = 86400;

Timestamp day_ts(std::int32_t day, int second = 0) {
  return Timestamp{std::chrono::seconds(static_cast<std::int64_t>(day) * kDay + second)};
}

WindowState state_with(int n, const IpAddress& addr, std::uint64_t p, std::uint64_t c, std::int32_t day) {
  WindowState s(n);
  for (std::uint64_t i = 0; i < p; ++i) s.record_event(addr, day_ts(day, static_cast<int>(i)), Label::Phishing);
  for (std::uint64_t i = 0; i < c; ++i) s.record_event(addr, day_ts(day, static_cast<int>(i)), Label::Clean);
  return s;
}

}  // namespace

TEST_CASE("day numbers are UTC days") {
  CHECK(day_number(ts("1970-01-01T00:00:00Z")) == 0);
  CHECK(day_number(ts("1970-01-01T23:59:59Z")) == 0);
  CHECK(day_number(ts("1970-01-02T00:00:00Z")) == 1);
  CHECK(day_number(ts("1969-12-31T23:59:59Z")) == -1);
}

TEST_CASE("params validation") {
  DetectorParams p;
  CHECK_NOTHROW(p.validate());
  auto field = [](DetectorParams q) -> std::string {
    try {
      q.validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return "";
  };
  p.window_days = -1;
  CHECK(field(p) == "window_days");
  p = {};
  p.window_days = 90;
  CHECK(field(p) == "");
  p.risk_threshold = 1.5;
  CHECK(field(p) == "risk_threshold");
  p = {};
  p.min_phishing = 0;
  CHECK(field(p) == "min_phishing");
  p = {};
  p.smoothing = -0.1;
  CHECK(field(p) == "smoothing");
}

TEST_CASE("recording events") {
  const auto a = ip("203.0.113.9");
  WindowState s(14);
  CHECK(s.record_event(a, day_ts(100), Label::Phishing) == EventOutcome::Applied);
  CHECK(s.window_counts(a) == WindowCounts{1, 0});

  // 10 phishing across 3 days.
  WindowState t(14);
  for (int i = 0; i < 10; ++i) t.record_event(a, day_ts(100 + i % 3, i), Label::Phishing);
  CHECK(t.window_counts(a).phishing == 10);

  // Late but in-window events are accepted; older ones are stale.
  CHECK(t.record_event(a, day_ts(102 - 13), Label::Clean) == EventOutcome::Applied);
  CHECK(t.record_event(a, day_ts(102 - 14), Label::Clean) == EventOutcome::Stale);
  CHECK(t.record_event(a, day_ts(102 - 15), Label::Clean) == EventOutcome::Stale);
  CHECK(t.stale_count() == 2);
  CHECK(t.window_counts(a) == WindowCounts{10, 1});
}

TEST_CASE("eviction at the day boundary") {
  const auto a = ip("203.0.113.9");
  WindowState s(7);
  s.record_event(a, day_ts(10, kDay - 1), Label::Phishing);
  s.advance_to(16);
  CHECK(s.window_counts(a).phishing == 1);
  s.advance_to(17);
  CHECK(s.window_counts(a).phishing == 0);
  s.advance_to(3);  // the cursor never moves back
  CHECK(*s.current_day() == 17);
  s.compact();
  CHECK(s.ip_count() == 0);
}

TEST_CASE("zero-day window retains nothing") {
  const auto a = ip("203.0.113.9");
  DetectorParams p;
  p.window_days = 0;
  Detector d(p);
  for (int i = 0; i < 50; ++i) {
    const auto r = d.process(a, day_ts(5, i), Label::Phishing);
    CHECK(r.outcome == EventOutcome::Applied);
    CHECK(r.decision == Decision::Pass);
    CHECK(r.score.window_phishing == 0);
  }
  CHECK(d.state().ip_count() == 0);
}

TEST_CASE("risk score arithmetic") {
  const auto a = ip("198.51.100.1");
  DetectorParams p;
  auto s = state_with(14, a, 10, 0, 50);
  auto r = risk_score(s, a, day_ts(50), p);
  CHECK(r.score == doctest::Approx(10.0 / 11.0));

  s = state_with(14, a, 0, 40, 50);
  CHECK(risk_score(s, a, day_ts(50), p).score == 0.0);
  CHECK(risk_score(WindowState(14), a, day_ts(50), p).score == 0.0);

  p.smoothing = 0;
  s = state_with(14, a, 5, 5, 50);
  CHECK(risk_score(s, a, day_ts(50), p).score == 0.5);
  // No history and no smoothing is still score 0.
  CHECK(risk_score(WindowState(14), a, day_ts(50), p).score == 0.0);
}

TEST_CASE("decisions") {
  const auto a = ip("198.51.100.1");
  const DetectorParams p;
  CHECK(classify(state_with(14, a, 20, 0, 9), a, day_ts(9), p) == Decision::Flag);
  CHECK(classify(state_with(14, a, 3, 0, 9), a, day_ts(9), p) == Decision::Pass);
  const auto s = state_with(14, a, 20, 200, 9);
  const auto r = risk_score(s, a, day_ts(9), p);
  CHECK(r.score == doctest::Approx(20.0 / 221.0));
  CHECK(decide(r, p) == Decision::Pass);
  // Exactly at the gate and threshold flags.
  DetectorParams q;
  q.smoothing = 0;
  q.risk_threshold = 0.5;
  CHECK(classify(state_with(14, a, 10, 10, 9), a, day_ts(9), q) == Decision::Flag);
  CHECK(classify(state_with(14, a, 9, 9, 9), a, day_ts(9), q) == Decision::Pass);
}

TEST_CASE("decision excludes the email being classified") {
  const auto a = ip("198.51.100.1");
  DetectorParams p;
  p.min_phishing = 1;
  p.smoothing = 0;
  Detector d(p);
  auto r = d.process(a, day_ts(1), Label::Phishing);
  CHECK(r.decision == Decision::Pass);
  CHECK(r.score.window_phishing == 0);
  r = d.process(a, day_ts(1, 5), Label::Phishing);
  CHECK(r.decision == Decision::Flag);
  CHECK(r.score.window_phishing == 1);
}

TEST_CASE("score monotonicity") {
  DetectorParams p;
  const auto a = ip("198.51.100.1");
  for (std::uint64_t c : {0u, 3u, 30u}) {
    double prev = -1;
    for (std::uint64_t ph = 0; ph < 30; ++ph) {
      const double s = risk_score(state_with(30, a, ph, c, 4), a, day_ts(4), p).score;
      CHECK(s >= prev);
      prev = s;
    }
  }
  for (std::uint64_t ph : {1u, 12u}) {
    double prev = 2;
    for (std::uint64_t c = 0; c < 30; ++c) {
      const double s = risk_score(state_with(30, a, ph, c, 4), a, day_ts(4), p).score;
      CHECK(s <= prev);
      prev = s;
    }
  }
}

TEST_CASE("window sums match a brute-force recount") {
  struct Ev {
    IpAddress ip;
    std::int32_t day;
    Label label;
  };
  std::mt19937_64 rng(3);
  const std::vector<IpAddress> ips{ip("1.0.0.1"), ip("1.0.0.2"), ip("2001:db8::5"), ip("9.9.9.9")};
  for (int n : {1, 2, 7, 14, 30}) {
    WindowState s(n);
    std::vector<Ev> applied;
    std::int32_t cursor = 1000;
    s.advance_to(cursor);
    for (int i = 0; i < 3000; ++i) {
      // Mostly forward, sometimes late.
      std::int32_t day = cursor + static_cast<std::int32_t>(rng() % 3);
      if (rng() % 5 == 0) day -= static_cast<std::int32_t>(rng() % (n + 3));
      const Ev e{ips[rng() % ips.size()], day, rng() % 3 ? Label::Clean : Label::Phishing};
      const auto before_cursor = std::max(cursor, day);
      const auto outcome = s.record_event(e.ip, day_ts(day, static_cast<int>(rng() % kDay)), e.label);
      cursor = before_cursor;
      const bool stale = day < cursor - n + 1;
      CHECK((outcome == EventOutcome::Stale) == stale);
      if (!stale) applied.push_back(e);

      if (i % 37 == 0) {
        for (const auto& addr : ips) {
          WindowCounts want;
          for (const auto& a : applied) {
            if (a.ip == addr && a.day >= cursor - n + 1 && a.day <= cursor) {
              (a.label == Label::Phishing ? want.phishing : want.clean) += 1;
            }
          }
          CHECK(s.window_counts(addr) == want);
        }
      }
    }
  }
}

TEST_CASE("merge of partitioned streams equals the whole") {
  std::mt19937_64 rng(9);
  WindowState whole(14), left(14), right(14);
  for (int i = 0; i < 2000; ++i) {
    const auto addr = IpAddress::v4(0x01000000u + static_cast<std::uint32_t>(rng() % 50));
    const auto at = day_ts(static_cast<std::int32_t>(i / 40), i);
    const auto label = rng() % 2 ? Label::Phishing : Label::Clean;
    whole.record_event(addr, at, label);
    // Split by IP so each side sees every event for its IPs.
    auto& side = (std::hash<IpAddress>{}(addr) & 1) ? left : right;
    side.advance_to(at);
    side.record_event(addr, at, label);
  }
  left.advance_to(*whole.current_day());
  right.advance_to(*whole.current_day());
  WindowState merged(14);
  merged.merge(right);
  merged.merge(left);
  CHECK(merged == whole);
  CHECK(serialize_state(merged) == serialize_state(whole));
  CHECK_THROWS_AS(merged.merge(WindowState(7)), std::invalid_argument);
}

TEST_CASE("detector requires a matching state") {
  DetectorParams p;
  CHECK_THROWS(Detector{p, WindowState(7)});
  p.window_days = 7;
  CHECK_NOTHROW(Detector{p, WindowState(7)});
  p.min_phishing = 0;
  CHECK_THROWS_AS(Detector{p}, ConfigError);
}

TEST_CASE("state round trip") {
  rt_test::TempDir dir("state");
  WindowState empty(14);
  save_state(empty, dir.path() / "e.state");
  const auto back = load_state(dir.path() / "e.state");
  CHECK(back == empty);
  CHECK_FALSE(back.current_day());

  WindowState s(30);
  s.record_event(ip("1.2.3.4"), day_ts(40), Label::Phishing);
  s.record_event(ip("1.2.3.4"), day_ts(41), Label::Clean);
  s.record_event(ip("2001:db8::1"), day_ts(45), Label::Phishing);
  s.record_event(ip("2001:db8::1"), day_ts(1), Label::Phishing);  // stale
  save_state(s, dir.path() / "s.state");
  const auto loaded = load_state(dir.path() / "s.state");
  CHECK(loaded == s);
  CHECK(loaded.stale_count() == 1);
  CHECK(loaded.window_counts(ip("1.2.3.4")) == WindowCounts{1, 1});
  CHECK(serialize_state(loaded) == serialize_state(s));

  CHECK_THROWS_AS(load_state(dir.path() / "missing.state"), IoError);
}

TEST_CASE("damaged state files are rejected") {
  WindowState s(14);
  s.record_event(ip("1.2.3.4"), day_ts(40), Label::Phishing);
  s.record_event(ip("1.2.3.5"), day_ts(40), Label::Clean);
  const auto good = serialize_state(s);
  CHECK_NOTHROW(parse_state(good));

  auto flipped = good;
  flipped.replace(flipped.find("40:1:0"), 6, "40:2:0");
  CHECK_THROWS_AS(parse_state(flipped), ParseError);

  CHECK_THROWS_AS(parse_state(good.substr(0, good.size() - 5)), ParseError);
  CHECK_THROWS_AS(parse_state(""), ParseError);
  CHECK_THROWS_AS(parse_state("garbage\n"), ParseError);

  // Every single-byte change is caught.
  for (std::size_t i = 0; i < good.size(); ++i) {
    auto bad = good;
    bad[i] = static_cast<char>(bad[i] == 'x' ? 'y' : 'x');
    CHECK_THROWS_AS(parse_state(bad), Error);
  }

  auto future = good;
  future.replace(future.find("version 1"), 9, "version 2");
  try {
    parse_state(future);
    FAIL("future version accepted");
  } catch (const VersionMismatch& e) {
    CHECK(e.found() == 2);
  }
}

TEST_CASE("feature extraction") {
  GeoTable geo;
  geo.insert(*Cidr::parse("20.0.0.0/8"), "US");
  AsnTable asn;
  asn.insert(*Cidr::parse("20.0.0.0/16"), AsnInfo{64500, "Example"});
  const GeoLookup lookup(&geo);

  auto rec = rt_test::make_record("<f@x>", "2021-01-05T10:00:00Z", Label::Phishing,
                                  {"from inner (inner [10.0.0.2]) by mx (mx [10.0.0.3])",
                                   "from a (a [20.0.0.9]) by inner (inner [10.0.0.2])"});
  rec.auth = {AuthState::Pass, AuthState::Fail, AuthState::Pass};
  const auto path = build_path(rec);

  PeriodStats stats;
  EntityAggregate ipagg;
  ipagg.phishing_count = 50;
  ipagg.clean_count = 50;
  stats.by_ip["20.0.0.9"] = ipagg;
  EntityAggregate asagg;
  asagg.phishing_count = 1;
  asagg.clean_count = 3;
  stats.by_asn["64500"] = asagg;

  const auto fv = extract_features(rec, path, &stats, lookup, &asn);
  CHECK(fv.ip_phishing_probability == 0.5);
  CHECK(fv.ip_phishing_volume == 50);
  CHECK(fv.as_phishing_probability == 0.25);
  CHECK(fv.as_phishing_volume == 1);
  CHECK(fv.country_phishing_probability == 0);
  CHECK(fv.country_phishing_volume == 0);
  CHECK(fv.path_length == 2);
  CHECK(fv.distinct_countries == 1);
  CHECK(fv.spf_pass == 1);
  CHECK(fv.dkim_pass == 0);
  CHECK(fv.dmarc_pass == 1);

  const auto vals = fv.values();
  CHECK(vals[0] == 0.5);
  CHECK(vals[11] == 1);
  CHECK(FeatureVector::column_names().size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK_FALSE(FeatureVector::column_names()[i].empty());

  // Unknown origin: every aggregate feature is zero.
  auto other = rt_test::make_record("<g@x>", "2021-01-05T10:00:00Z", Label::Clean,
                                    {"from a (a [30.0.0.9]) by mx (mx [10.0.0.3])"});
  const auto zero = extract_features(other, build_path(other), &stats, lookup, &asn);
  CHECK(zero.ip_phishing_probability == 0);
  CHECK(zero.ip_phishing_volume == 0);
  CHECK(zero.as_phishing_volume == 0);
  CHECK(zero.route_phishing_probability == 0);
}
