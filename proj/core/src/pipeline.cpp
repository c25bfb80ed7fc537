#include "relaytrace/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "relaytrace/csv.hpp"
#include "relaytrace/digest.hpp"
#include "relaytrace/errors.hpp"
#include "relaytrace/relay_path.hpp"
#include "relaytrace/reports.hpp"
#include "relaytrace/synth.hpp"

namespace relaytrace {

namespace fs = std::filesystem;
using nlohmann::json;

void parallel_slices(std::size_t n, std::size_t shards,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  shards = std::max<std::size_t>(1, shards);
  if (shards == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t s = 0; s < shards; ++s) {
    const auto begin = n * s / shards;
    const auto end = n * (s + 1) / shards;
    threads.emplace_back([&, s, begin, end] {
      try {
        fn(s, begin, end);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t LoadedCorpus::skip_count() const {
  std::size_t n = 0;
  for (const auto& [p, k] : skipped) n += k;
  return n;
}

LoadedCorpus load_corpora(const std::vector<fs::path>& paths) {
  LoadedCorpus out;
  for (const auto& path : paths) {
    const auto skipped = stream_corpus(path, [&](EmailRecord&& r) { out.records.push_back(std::move(r)); });
    out.skipped.emplace_back(path, skipped);
  }
  return out;
}

GeoLookup Tables::geo_lookup() const {
  return GeoLookup(geo ? &*geo : nullptr, geo_fallback ? &*geo_fallback : nullptr);
}

Tables load_tables(const TablePaths& paths) {
  Tables t;
  if (paths.asn) t.asn = load_asn_table(*paths.asn);
  if (paths.geo) t.geo = load_geo_table(*paths.geo);
  if (paths.geo_fallback) t.geo_fallback = load_geo_table(*paths.geo_fallback);
  if (paths.provider) t.provider = load_provider_table(*paths.provider);
  if (paths.mx) t.mx = load_mx_snapshot(*paths.mx);
  return t;
}

Aggregator aggregate(const std::vector<EmailRecord>& records, const Tables& tables,
                     std::size_t shards, std::vector<RecordFacts>* facts_out) {
  shards = std::max<std::size_t>(1, std::min(shards, std::max<std::size_t>(1, records.size())));
  std::vector<Aggregator> partial(shards);
  if (facts_out) facts_out->assign(records.size(), RecordFacts{});
  const auto geo = tables.geo_lookup();
  parallel_slices(records.size(), shards, [&](std::size_t s, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto facts = derive_facts(records[i], build_path(records[i]), tables.asn_ptr(), geo);
      partial[s].add(facts);
      if (facts_out) (*facts_out)[i] = std::move(facts);
    }
  });
  Aggregator total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

std::map<std::string, bool> infer_org_prefilters(const std::vector<EmailRecord>& records,
                                                 const MxSnapshot& mx,
                                                 const ProviderTable& providers) {
  std::map<std::string, const EmailRecord*> earliest;
  for (const auto& r : records) {
    auto& e = earliest[r.org_id];
    if (!e || std::tie(r.delivered_at, r.message_id) < std::tie(e->delivered_at, e->message_id)) e = &r;
  }
  std::map<std::string, bool> out;
  for (const auto& [org, r] : earliest) {
    try {
      out[org] = infer_prefilter(r->recipient_domain, utc_day(r->delivered_at), mx, providers);
    } catch (const MissingMxSnapshot&) {
    }
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

json input_digests(const RunConfig& cfg) {
  json inputs = json::array();
  const auto add = [&](const char* role, const fs::path& p) {
    inputs.push_back({{"role", role}, {"path", p.string()}, {"sha256", sha256_file(p)},
                      {"bytes", fs::file_size(p)}});
  };
  for (const auto& c : cfg.corpus) add("corpus", c);
  if (cfg.tables.asn) add("asn", *cfg.tables.asn);
  if (cfg.tables.geo) add("geo", *cfg.tables.geo);
  if (cfg.tables.geo_fallback) add("geo_fallback", *cfg.tables.geo_fallback);
  if (cfg.tables.provider) add("provider", *cfg.tables.provider);
  if (cfg.tables.mx) add("mx", *cfg.tables.mx);
  return inputs;
}

json skip_counts(const LoadedCorpus& corpus) {
  json out = json::array();
  for (const auto& [p, k] : corpus.skipped) out.push_back({{"path", p.string()}, {"skipped", k}});
  return out;
}

std::vector<std::string> selected_periods(const RunConfig& cfg, const Aggregator& agg) {
  if (!cfg.periods.empty()) return cfg.periods;
  return agg.period_labels();
}

std::string ip_or_empty(const std::optional<IpAddress>& ip) { return ip ? ip->to_string() : ""; }

}  // namespace

AnalyzeSummary cmd_analyze(const RunConfig& cfg) {
  validate_config(cfg, Command::Analyze);
  const auto tables = load_tables(cfg.tables);
  auto corpus = load_corpora(cfg.corpus);

  std::vector<RecordFacts> facts;
  const auto agg = aggregate(corpus.records, tables, cfg.shard_count, &facts);

  ReportInputs in;
  in.aggregator = &agg;
  in.periods = selected_periods(cfg, agg);
  in.settings = cfg.analytics;
  if (tables.mx && tables.provider) {
    const auto prefilter = infer_org_prefilters(corpus.records, *tables.mx, *tables.provider);
    std::set<std::string> comparison(cfg.comparison_orgs.begin(), cfg.comparison_orgs.end());
    for (const auto& org : comparison) {
      if (!prefilter.count(org)) throw UnknownOrg(org);
    }
    std::map<std::string, std::vector<RecordFacts>> by_period;
    std::vector<RecordFacts> known;
    for (const auto& f : facts) {
      if (!prefilter.count(f.org_id)) continue;
      known.push_back(f);
      by_period[f.period].push_back(f);
    }
    const auto* cmp = comparison.empty() ? nullptr : &comparison;
    in.cohorts["all"] = cohort_overlap(known, prefilter, cmp);
    for (const auto& p : in.periods) in.cohorts[p] = cohort_overlap(by_period[p], prefilter, cmp);
    in.cohorts_available = true;
  }

  ensure_dir(cfg.output_dir);
  AnalyzeSummary summary;
  summary.records = corpus.records.size();
  summary.skipped = corpus.skip_count();
  summary.periods = in.periods;
  json reports = json::array();
  for (const auto& [name, text] : render_reports(in)) {
    const auto path = cfg.output_dir / name;
    write_text(path, text);
    summary.files.push_back(path);
    reports.push_back({{"name", name}, {"sha256", sha256_hex(text)}});
  }

  json manifest = {{"tool", "relaytrace"},
                   {"command", "analyze"},
                   {"inputs", input_digests(cfg)},
                   {"config", json::parse(config_to_json(cfg))},
                   {"records", summary.records},
                   {"skipped", skip_counts(corpus)},
                   {"periods", in.periods},
                   {"reports", reports}};
  const auto manifest_path = cfg.output_dir / "run_manifest.json";
  write_text(manifest_path, manifest.dump(2) + "\n");
  summary.files.push_back(manifest_path);
  return summary;
}

std::vector<DetectionRow> run_detection(const std::vector<EmailRecord>& records,
                                        const DetectorParams& params,
                                        std::optional<WindowState> prior, std::size_t shards,
                                        WindowState* final_state) {
  params.validate();
  shards = std::max<std::size_t>(1, shards);
  if (prior && prior->window_days() != params.window_days) {
    throw ConfigError("detector.window_days", "does not match the loaded detector state (" +
                                                  std::to_string(prior->window_days()) + ")");
  }

  const std::size_t n = records.size();
  std::vector<DetectionRow> rows(n);
  std::vector<std::size_t> shard_of(n, 0);
  std::vector<std::int32_t> cursor(n, 0);
  std::optional<std::int32_t> running = prior ? prior->current_day() : std::nullopt;
  const std::hash<IpAddress> hasher;
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].message_id = records[i].message_id;
    rows[i].origin_ip = build_path(records[i]).origin_ip;
    if (!rows[i].origin_ip) continue;
    rows[i].scored = true;
    const auto day = day_number(records[i].delivered_at);
    running = running ? std::max(*running, day) : day;
    cursor[i] = *running;
    shard_of[i] = hasher(*rows[i].origin_ip) % shards;
  }

  std::vector<std::vector<std::pair<IpAddress, std::vector<DayBucket>>>> prior_parts(shards);
  if (prior) {
    for (auto& entry : prior->snapshot()) prior_parts[hasher(entry.first) % shards].push_back(std::move(entry));
  }
  std::vector<WindowState> states;
  for (std::size_t s = 0; s < shards; ++s) {
    states.push_back(WindowState::from_parts(params.window_days, prior ? prior->current_day() : std::nullopt,
                                             prior && s == 0 ? prior->stale_count() : 0,
                                             std::move(prior_parts[s])));
  }

  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mu;
  const auto work = [&](std::size_t s) {
    try {
      Detector det(params, std::move(states[s]));
      for (std::size_t i = 0; i < n; ++i) {
        if (!rows[i].scored || shard_of[i] != s) continue;
        det.state().advance_to(cursor[i]);
        rows[i].result = det.process(*rows[i].origin_ip, records[i].delivered_at, records[i].label);
      }
      states[s] = det.state();
      if (running) states[s].advance_to(*running);
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
    }
  };
  if (shards == 1) {
    work(0);
  } else {
    for (std::size_t s = 0; s < shards; ++s) threads.emplace_back(work, s);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  if (final_state) {
    WindowState merged(params.window_days);
    for (const auto& st : states) merged.merge(st);
    *final_state = std::move(merged);
  }
  return rows;
}

DetectSummary cmd_detect(const RunConfig& cfg) {
  validate_config(cfg, Command::Detect);
  auto corpus = load_corpora(cfg.corpus);
  std::optional<WindowState> prior;
  if (cfg.state_path && fs::exists(*cfg.state_path)) prior = load_state(*cfg.state_path);

  WindowState final_state(cfg.detector.window_days);
  const auto rows = run_detection(corpus.records, cfg.detector, std::move(prior), cfg.shard_count, &final_state);

  ensure_dir(cfg.output_dir);
  DetectSummary summary;
  summary.records = corpus.records.size();
  summary.skipped = corpus.skip_count();
  std::string out = "message_id,decision,score,window_phishing,window_clean,origin_ip,outcome\n";
  for (const auto& r : rows) {
    out += csv::escape(r.message_id);
    out += ',';
    out += to_string(r.result.decision);
    out += ',' + csv::format_double(r.result.score.score) + ',' + std::to_string(r.result.score.window_phishing) +
           ',' + std::to_string(r.result.score.window_clean) + ',' + ip_or_empty(r.origin_ip) + ',';
    out += !r.scored ? "no_origin" : (r.result.outcome == EventOutcome::Stale ? "stale" : "applied");
    out += '\n';
    if (r.result.decision == Decision::Flag) ++summary.flagged;
    if (!r.scored) ++summary.unscored;
  }
  write_text(cfg.output_dir / "decisions.csv", out);
  summary.stale = final_state.stale_count();

  if (cfg.export_features) {
    const auto tables = load_tables(cfg.tables);
    const auto agg = aggregate(corpus.records, tables, cfg.shard_count);
    const auto geo = tables.geo_lookup();
    std::string f = "message_id";
    for (const auto name : FeatureVector::column_names()) {
      f += ',';
      f += name;
    }
    f += '\n';
    for (const auto& r : corpus.records) {
      const auto fv = extract_features(r, build_path(r), agg.period(month_label(r.delivered_at)), geo,
                                       tables.asn_ptr());
      f += csv::escape(r.message_id);
      for (const double v : fv.values()) f += ',' + csv::format_double(v);
      f += '\n';
    }
    write_text(cfg.output_dir / "features.csv", f);
  }

  const auto state_path = cfg.state_path.value_or(cfg.output_dir / "detector.state");
  save_state(final_state, state_path);
  return summary;
}

std::vector<RecordVerdict> validate_paths(const std::vector<EmailRecord>& records,
                                          const AsnTable& asn, const MxSnapshot& mx,
                                          std::size_t shards) {
  const std::size_t n = records.size();
  shards = std::max<std::size_t>(1, std::min(shards, std::max<std::size_t>(1, n)));
  std::vector<RelayPath> paths(n);
  std::vector<std::string> periods(n);
  parallel_slices(n, shards, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      paths[i] = build_path(records[i]);
      periods[i] = month_label(records[i].delivered_at);
    }
  });

  std::map<std::string, BenignPairIndex> index;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].label == Label::Clean) index[periods[i]].add(records[i], paths[i], mx);
  }

  static const BenignPairIndex kEmptyIndex;
  std::vector<RecordVerdict> out(n);
  parallel_slices(n, shards, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto it = index.find(periods[i]);
      auto& v = out[i];
      v.message_id = records[i].message_id;
      v.period = periods[i];
      v.label = records[i].label;
      v.origin_ip = paths[i].origin_ip;
      v.verdict = classify_authenticity(records[i], paths[i], mx, asn,
                                        it == index.end() ? kEmptyIndex : it->second);
    }
  });
  return out;
}

ValidateSummary cmd_validate_paths(const RunConfig& cfg) {
  validate_config(cfg, Command::ValidatePaths);
  const auto tables = load_tables(cfg.tables);
  auto corpus = load_corpora(cfg.corpus);
  const auto verdicts = validate_paths(corpus.records, *tables.asn, *tables.mx, cfg.shard_count);

  ensure_dir(cfg.output_dir);
  ValidateSummary summary;
  summary.records = corpus.records.size();
  summary.skipped = corpus.skip_count();
  std::map<UnverifiedReason, std::size_t> reasons;
  std::string out = "message_id,period,label,verdict,reason,origin_ip,mx_sender_ip\n";
  for (const auto& v : verdicts) {
    ++summary.by_verdict[v.verdict.verdict];
    if (v.verdict.verdict == Verdict::Unverified) ++reasons[v.verdict.reason];
    out += csv::escape(v.message_id) + ',' + v.period + ',' + std::string(to_string(v.label)) + ',' +
           std::string(to_string(v.verdict.verdict)) + ',' + std::string(to_string(v.verdict.reason)) + ',' +
           ip_or_empty(v.origin_ip) + ',' + ip_or_empty(v.verdict.mx_sender_ip) + '\n';
  }
  write_text(cfg.output_dir / "verdicts.csv", out);

  const double total = static_cast<double>(verdicts.size());
  const auto share = [&](std::size_t k) { return csv::format_double(total > 0 ? k / total : 0.0); };
  const auto count = [&](Verdict v) {
    const auto it = summary.by_verdict.find(v);
    return it == summary.by_verdict.end() ? std::size_t{0} : it->second;
  };
  std::string s = "category,count,share\n";
  std::size_t verified = 0;
  for (const auto v : {Verdict::SameAs, Verdict::PairMatch, Verdict::FullPathMatch,
                       Verdict::SingleMxHopExact, Verdict::SingleMxHopSameAs}) {
    s += std::string(to_string(v)) + ',' + std::to_string(count(v)) + ',' + share(count(v)) + '\n';
    verified += count(v);
  }
  const auto single = count(Verdict::SingleMxHopExact) + count(Verdict::SingleMxHopSameAs);
  s += "single_mx_hop," + std::to_string(single) + ',' + share(single) + '\n';
  s += "verified," + std::to_string(verified) + ',' + share(verified) + '\n';
  s += "unverified," + std::to_string(count(Verdict::Unverified)) + ',' + share(count(Verdict::Unverified)) + '\n';
  for (const auto r : {UnverifiedReason::MissingMxSnapshot, UnverifiedReason::NoOrigin,
                       UnverifiedReason::NoTestMatched}) {
    s += "unverified:" + std::string(to_string(r)) + ',' + std::to_string(reasons[r]) + ',' + share(reasons[r]) + '\n';
  }
  s += "total," + std::to_string(verdicts.size()) + ",1\n";
  write_text(cfg.output_dir / "validation_summary.csv", s);
  return summary;
}

std::size_t cmd_synth(const fs::path& spec_path, const fs::path& out_dir) {
  const auto spec = load_scenario(spec_path);
  const auto scenario = generate(spec);
  write_scenario(scenario, out_dir);
  return scenario.records.size();
}

}  // namespace relaytrace
