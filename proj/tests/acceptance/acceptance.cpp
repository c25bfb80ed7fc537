// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chains.hpp"
#include "relaytrace/analytics.hpp"
#include "relaytrace/detector.hpp"
#include "relaytrace/errors.hpp"
#include "relaytrace/pipeline.hpp"
#include "relaytrace/reports.hpp"
#include "relaytrace/synth.hpp"
#include "support.hpp"

using namespace relaytrace;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) note << what;
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

EntityAggregate counts(const char* entity, std::uint64_t phishing, std::uint64_t clean) {
  EntityAggregate a;
  a.entity = entity;
  a.phishing_count = phishing;
  a.clean_count = clean;
  return a;
}

const GeneratedScenario& mixed() {
  static const GeneratedScenario g = generate(load_scenario(RELAYTRACE_FIXTURE_DIR "/mixed_scenario.json"));
  return g;
}

// 1. Concentration categories for the published per-AS volumes.
void concentration(Outcome& o) {
  const auto t0 = Clock::now();
  struct Row {
    const char* asn;
    const char* month;
    std::uint64_t phishing, clean;
  };
  const Row low[] = {
      {"14618", "2020-01", 6144, 49655611}, {"14618", "2020-10", 10574, 68629830},
      {"14618", "2021-01", 12518, 40778516}, {"16509", "2020-01", 7845, 35086658},
      {"16509", "2020-10", 10902, 46979360}, {"16509", "2021-01", 14465, 23541485},
      {"8075", "2020-01", 7507, 17481559},   {"8075", "2020-10", 10727, 22886922},
      {"8075", "2021-01", 11839, 15272305},
  };
  for (const auto& r : low) {
    o.require(classify_concentration(counts(r.asn, r.phishing, r.clean)) == ConcentrationCategory::Low,
              std::string("AS ") + r.asn + " " + r.month + " not Low");
  }
  const Row high[] = {{"9009", "2020-01", 955, 29099}, {"9009", "2020-10", 3207, 47560},
                      {"9009", "2021-01", 2135, 8685}};
  for (const auto& r : high) {
    o.require(classify_concentration(counts(r.asn, r.phishing, r.clean)) == ConcentrationCategory::High,
              std::string("AS 9009 ") + r.month + " not High");
  }
  const auto burst = counts("52000", 1673, 0);
  o.require(probability_of_phishing(burst) == 1.0, "AS 52000 probability != 1");
  o.require(classify_concentration(burst) == ConcentrationCategory::High, "AS 52000 not High");
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, "took too long");
  o.note << "13 rows, " << secs << "s";
}

// 2. Origin extraction on the hand-built chains.
void origins(Outcome& o) {
  const auto chains = rt_test::origin_chains();
  o.require(chains.size() >= 20, "fewer than 20 fixtures");
  std::size_t ok = 0;
  for (const auto& c : chains) {
    EmailRecord r;
    r.raw_headers = c.headers;
    const auto p = build_path(r);
    const bool origin_ok = c.origin ? p.origin_ip == rt_test::ip(c.origin) : !p.origin_ip;
    const bool good = origin_ok && p.length == c.length;
    o.require(good, std::string("chain '") + c.name + "' ");
    ok += good ? 1 : 0;
  }
  o.note << ok << "/" << chains.size() << " chains";
}

// 3. Unverified exactly on the cross-AS forgeries.
void authenticity(Outcome& o) {
  const auto t0 = Clock::now();
  const auto& g = mixed();
  o.require(g.records.size() >= 10000, "corpus too small");
  const auto verdicts = validate_paths(g.records, g.asn_table(), g.mx_snapshot(), 1);
  std::size_t false_unverified = 0, missed = 0, forged = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const bool cross = g.truth[i].forgery == ForgeryKind::CrossAs;
    const bool unverified = verdicts[i].verdict.verdict == Verdict::Unverified;
    forged += cross ? 1 : 0;
    if (unverified && !cross) ++false_unverified;
    if (!unverified && cross) ++missed;
  }
  o.require(forged > 0, "no cross-AS forgeries planted");
  o.require(false_unverified == 0, "honest records marked unverified ");
  o.require(missed == 0, "forged records verified ");
  const double secs = seconds_since(t0);
  o.require(secs < 30.0, "took too long ");
  o.note << g.records.size() << " records, " << forged << " forged, " << false_unverified
         << " false unverified, " << missed << " missed, " << secs << "s";
}

// 4. Window sums against a recount, recall on planted bursts, throughput.
void detector(Outcome& o) {
  struct Ev {
    std::uint32_t ip;
    std::int32_t day;
    bool phishing;
  };
  std::mt19937_64 rng(17);
  std::size_t checks = 0;
  const std::uint32_t n_ips = 40;
  const auto addr_of = [](std::uint32_t n) { return IpAddress::v4(0x0B000000u + n); };
  for (int n : {1, 7, 14, 30, 90}) {
    WindowState s(n);
    std::vector<Ev> raw;  // applied events, by the oracle's own stale rule
    std::int32_t cursor = 18000;
    s.advance_to(cursor);
    for (std::int32_t arrival = 18000; arrival < 18000 + 150; ++arrival) {
      const int k = static_cast<int>(rng() % 60);
      for (int i = 0; i < k; ++i) {
        std::int32_t d = arrival;
        if (rng() % 10 == 0) d -= static_cast<std::int32_t>(rng() % 100);  // late arrivals
        const Ev e{static_cast<std::uint32_t>(rng() % n_ips), d, rng() % 4 == 0};
        const auto at = Timestamp{std::chrono::seconds(static_cast<std::int64_t>(d) * 86400 + 5)};
        const auto outcome = s.record_event(addr_of(e.ip), at, e.phishing ? Label::Phishing : Label::Clean);
        cursor = std::max(cursor, d);
        // Stale exactly when it predates the window at arrival time.
        const bool stale = d < cursor - n + 1;
        if ((outcome == EventOutcome::Stale) != stale) o.require(false, "stale mismatch n=" + std::to_string(n) + " ");
        if (!stale) raw.push_back(e);
      }
      s.advance_to(arrival);
      cursor = std::max(cursor, arrival);
      for (std::uint32_t ipn = 0; ipn < n_ips; ++ipn) {
        WindowCounts want;
        for (const auto& e : raw) {
          if (e.ip == ipn && e.day >= cursor - n + 1 && e.day <= cursor) (e.phishing ? want.phishing : want.clean) += 1;
        }
        ++checks;
        if (!(s.window_counts(addr_of(ipn)) == want)) o.require(false, "window mismatch n=" + std::to_string(n) + " ");
      }
    }
  }

  // Planted bursts against benign background at default parameters.
  const auto spec = parse_scenario(R"({
    "seed": 5, "start": "2021-01-01", "end": "2021-01-31", "organizations": 6,
    "archetypes": [
      {"kind": "BenignBackground", "name": "benign", "asn": 16509, "ip_count": 300, "clean": 20000},
      {"kind": "BurstSender", "name": "burst", "asn": 52000, "country": "BR", "ip_count": 20,
       "phishing": 1673, "campaigns": 40,
       "bursts": [{"start": "2021-01-12T08:00:00Z", "minutes": 30},
                  {"start": "2021-01-19T14:30:00Z", "minutes": 30}]}
    ]
  })");
  const auto g = generate(spec);
  const DetectorParams params;
  const auto rows = run_detection(g.records, params, std::nullopt, 1, nullptr);
  std::size_t eligible = 0, flagged = 0, false_pos = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool flag = rows[i].scored && rows[i].result.decision == Decision::Flag;
    if (g.truth[i].archetype == "benign") {
      false_pos += flag ? 1 : 0;
    } else if (g.truth[i].label == Label::Phishing &&
               rows[i].result.score.window_phishing >= params.min_phishing) {
      ++eligible;
      flagged += flag ? 1 : 0;
    }
  }
  const double recall = eligible ? static_cast<double>(flagged) / static_cast<double>(eligible) : 0.0;
  o.require(eligible > 0 && recall >= 0.95, "recall below 0.95 ");
  o.require(false_pos == 0, "benign emails flagged ");

  // Throughput on 1M events.
  const auto t0 = Clock::now();
  Detector det(params);
  std::size_t flags = 0;
  for (std::size_t i = 0; i < 1000000; ++i) {
    const auto addr = IpAddress::v4(0x0C000000u + static_cast<std::uint32_t>(rng() % 20000));
    const Timestamp at{std::chrono::seconds(1609459200 + static_cast<std::int64_t>(i) * 8)};
    flags += det.process(addr, at, rng() % 5 ? Label::Clean : Label::Phishing).decision == Decision::Flag;
  }
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, "1M events too slow ");
  o.note << checks << " window checks, recall " << recall << " (" << flagged << "/" << eligible << "), "
         << false_pos << " false positives, 1M events " << secs << "s";
}

// 5. Byte-identical outputs across shard counts.
void determinism(Outcome& o) {
  rt_test::TempDir dir("accept-shards");
  write_scenario(mixed(), dir.path());
  auto cfg = load_config(dir.path() / "config.json");
  cfg.export_features = true;
  std::map<std::string, std::string> baseline;
  for (std::size_t shards : {1u, 4u, 8u}) {
    cfg.shard_count = shards;
    cfg.output_dir = dir.path() / ("run" + std::to_string(shards));
    cfg.state_path = cfg.output_dir / "detector.state";
    cmd_analyze(cfg);
    cmd_detect(cfg);
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(cfg.output_dir)) {
      const auto name = e.path().filename().string();
      // The manifest echoes the shard count itself.
      if (name != "run_manifest.json") files[name] = rt_test::slurp(e.path());
    }
    if (shards == 1) {
      baseline = files;
      o.require(files.count("detector.state") == 1, "no detector state written ");
    } else {
      o.require(files == baseline, "shard count " + std::to_string(shards) + " differs ");
    }
  }
  o.note << baseline.size() << " files compared across shard counts 1, 4, 8";
}

// 6. Curve shape, campaign oracle, Venn totals.
void curves(Outcome& o) {
  const auto& g = mixed();
  Tables t;
  t.asn = g.asn_table();
  t.geo = g.geo_table();
  const auto agg = aggregate(g.records, t, 4);
  std::size_t n_curves = 0;
  const auto check_curve = [&](const AggregateMap& m, CurveMeasure by, const std::string& what) {
    const auto v = values(m);
    std::uint64_t total = 0;
    for (const auto& a : v) total += by == CurveMeasure::Phishing ? a.phishing_count : a.clean_count;
    if (v.empty() || total == 0) return;
    const auto curve = cumulative_fraction_curve(v, by);
    bool mono = true;
    for (std::size_t i = 1; i < curve.size(); ++i) mono = mono && curve[i].cumulative_fraction >= curve[i - 1].cumulative_fraction;
    o.require(mono, what + " not nondecreasing ");
    o.require(std::abs(curve.back().cumulative_fraction - 1.0) <= 1e-12, what + " does not end at 1 ");
    ++n_curves;
  };
  for (const auto& [period, stats] : agg.periods()) {
    for (auto by : {CurveMeasure::Phishing, CurveMeasure::Clean}) {
      check_curve(stats.by_ip, by, period + " ip");
      check_curve(stats.by_asn, by, period + " as");
      check_curve(stats.by_route, by, period + " route");
    }
    check_curve(stats.by_campaign, CurveMeasure::Phishing, period + " campaign");
  }

  // Independent group-by over raw records (subjects here are ASCII).
  std::map<std::string, std::map<std::pair<std::string, std::string>, std::uint64_t>> oracle;
  for (const auto& r : g.records) {
    if (r.label != Label::Phishing) continue;
    std::string subject;
    for (unsigned char c : r.subject) {
      o.require(c < 0x80, "non-ASCII subject in oracle corpus ");
      if (std::isalnum(c)) subject.push_back(static_cast<char>(std::tolower(c)));
    }
    ++oracle[month_label(r.delivered_at)][{r.from_email, subject}];
  }
  std::size_t campaigns = 0;
  for (const auto& [period, stats] : agg.periods()) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> got;
    for (const auto& [key, a] : stats.by_campaign) {
      const auto sep = key.find('\x1f');
      got[{key.substr(0, sep), key.substr(sep + 1)}] = a.phishing_count;
    }
    o.require(got == oracle[period], period + " campaign counts differ ");
    campaigns += got.size();
  }

  // Venn regions over high-concentration ASes.
  std::map<std::string, std::set<std::string>> high;
  std::set<std::string> all;
  const auto periods = agg.period_labels();
  for (const auto& p : periods) {
    for (const auto& [asn, a] : agg.period(p)->by_asn) {
      if (classify_concentration(a) == ConcentrationCategory::High) {
        high[p].insert(asn);
        all.insert(asn);
      }
    }
  }
  const auto regions = persistence_sets(high, periods);
  std::size_t sum = 0;
  for (const auto& r : regions) sum += r.count;
  o.require(sum == all.size(), "Venn regions do not sum to the union ");
  o.require(!all.empty(), "no high-concentration ASes ");
  o.note << n_curves << " curves, " << campaigns << " campaign groups, " << regions.size()
         << " Venn regions summing to " << sum;
}

// 7. Lifespan formatting.
void lifespan(Outcome& o) {
  EntityAggregate a;
  const auto first = rt_test::ts("2021-01-03T06:00:00Z");
  a.add(Label::Phishing, first);
  a.add(Label::Clean, first - std::chrono::hours(30));
  a.add(Label::Phishing, first + std::chrono::hours(100));
  a.add(Label::Phishing, first + std::chrono::days(15) + std::chrono::hours(11) + std::chrono::minutes(59) +
                             std::chrono::seconds(34));
  const auto text = format_lifespan(phishing_lifespan(a));
  o.require(text == "15 days 11:59:34", "got '" + text + "' ");
  o.note << text;
}

// 8. State persistence fails closed.
void persistence(Outcome& o) {
  rt_test::TempDir dir("accept-state");
  WindowState s(14);
  run_detection(mixed().records, DetectorParams{}, std::nullopt, 2, &s);
  o.require(s.ip_count() > 0, "empty state ");
  const auto path = dir.path() / "detector.state";
  save_state(s, path);
  const auto back = load_state(path);
  o.require(back == s && serialize_state(back) == serialize_state(s), "round trip lost data ");
  o.require(load_state([&] {
              save_state(WindowState(30), dir.path() / "e.state");
              return dir.path() / "e.state";
            }()) == WindowState(30),
            "empty round trip ");

  const auto text = serialize_state(s);
  std::size_t rejected = 0, tried = 0;
  std::mt19937 rng(1);
  for (int i = 0; i < 200; ++i) {
    auto bad = text;
    const auto pos = rng() % bad.size();
    bad[pos] = static_cast<char>(bad[pos] ^ (1 + rng() % 127));
    ++tried;
    try {
      parse_state(bad);
    } catch (const Error&) {
      ++rejected;
    }
  }
  ++tried;
  try {
    parse_state(text.substr(0, text.size() / 2));
  } catch (const Error&) {
    ++rejected;
  }
  o.require(rejected == tried, "corrupted state accepted ");

  auto future = text;
  future.replace(future.find("version 1\n"), 10, "version 2\n");
  bool version_rejected = false;
  try {
    parse_state(future);
  } catch (const VersionMismatch&) {
    version_rejected = true;
  }
  o.require(version_rejected, "future version accepted ");
  o.note << s.ip_count() << " IPs round-tripped, " << rejected << "/" << tried << " corruptions rejected";
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
      {"1 concentration reproduction", concentration},
      {"2 origin extraction", origins},
      {"3 authenticity verdicts", authenticity},
      {"4 detector correctness", detector},
      {"5 merge determinism", determinism},
      {"6 curve properties", curves},
      {"7 lifespan arithmetic", lifespan},
      {"8 round-trip and fail-closed", persistence},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << "exception: " << e.what();
    }
    std::printf("%s  %s  (%s)\n", o.pass ? "PASS" : "FAIL", name, o.note.str().c_str());
    failures += o.pass ? 0 : 1;
  }
  return failures ? 1 : 0;
}
