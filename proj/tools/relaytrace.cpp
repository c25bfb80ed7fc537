// relaytrace: analyze, detect, validate-paths, synth, check-config.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relaytrace/config.hpp"
#include "relaytrace/errors.hpp"
#include "relaytrace/pipeline.hpp"

namespace fs = std::filesystem;
using namespace relaytrace;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> corpus;
  std::string asn, geo, geo_fallback, provider, mx;
  std::string output;
  std::string state;
  std::vector<std::string> periods;
  std::optional<std::size_t> shards;
  std::optional<int> window_days;
  std::optional<std::uint64_t> min_phishing;
  std::optional<double> risk_threshold;
  std::optional<double> smoothing;
  std::optional<std::uint64_t> country_min_total;
  std::optional<std::uint64_t> yoy_min_phishing;
  std::optional<std::size_t> top_k;
  bool export_features = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON run config (default: $RELAYTRACE_CONFIG)");
  cmd->add_option("--corpus", o.corpus, "corpus file(s); replaces the config list");
  cmd->add_option("--asn", o.asn, "prefix,asn,owner table");
  cmd->add_option("--geo", o.geo, "prefix,country table");
  cmd->add_option("--geo-fallback", o.geo_fallback, "consulted when --geo has no match");
  cmd->add_option("--provider", o.provider, "prefix,tag table");
  cmd->add_option("--mx", o.mx, "domain,date,ip MX snapshot");
  cmd->add_option("-o,--output", o.output, "output directory");
  cmd->add_option("--shards", o.shards, "worker shards");
}

RunConfig resolve_config(const Overrides& o) {
  std::string path = o.config;
  if (path.empty()) {
    if (const char* env = std::getenv("RELAYTRACE_CONFIG"); env && *env) path = env;
  }
  RunConfig cfg;
  if (!path.empty()) {
    cfg = load_config(path);
  } else {
    cfg = parse_config("{}", fs::current_path());
  }
  const auto abs = [](const std::string& p) { return fs::absolute(p).lexically_normal(); };
  if (!o.corpus.empty()) {
    cfg.corpus.clear();
    for (const auto& c : o.corpus) cfg.corpus.push_back(abs(c));
  }
  if (!o.asn.empty()) cfg.tables.asn = abs(o.asn);
  if (!o.geo.empty()) cfg.tables.geo = abs(o.geo);
  if (!o.geo_fallback.empty()) cfg.tables.geo_fallback = abs(o.geo_fallback);
  if (!o.provider.empty()) cfg.tables.provider = abs(o.provider);
  if (!o.mx.empty()) cfg.tables.mx = abs(o.mx);
  if (!o.output.empty()) cfg.output_dir = abs(o.output);
  if (!o.state.empty()) cfg.state_path = abs(o.state);
  if (!o.periods.empty()) cfg.periods = o.periods;
  if (o.shards) cfg.shard_count = *o.shards;
  if (o.window_days) cfg.detector.window_days = *o.window_days;
  if (o.min_phishing) cfg.detector.min_phishing = *o.min_phishing;
  if (o.risk_threshold) cfg.detector.risk_threshold = *o.risk_threshold;
  if (o.smoothing) cfg.detector.smoothing = *o.smoothing;
  if (o.country_min_total) cfg.analytics.country_min_total = *o.country_min_total;
  if (o.yoy_min_phishing) cfg.analytics.yoy_min_phishing = *o.yoy_min_phishing;
  if (o.top_k) cfg.analytics.top_k = *o.top_k;
  if (o.export_features) cfg.export_features = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relay-path forensics and sender-network phishing analytics"};
  app.require_subcommand(1);
  Overrides o;

  auto* analyze = app.add_subcommand("analyze", "aggregate a corpus and write report CSVs");
  add_common(analyze, o);
  analyze->add_option("--period", o.periods, "restrict reports to these YYYY-MM periods");
  analyze->add_option("--country-min-total", o.country_min_total);
  analyze->add_option("--yoy-min-phishing", o.yoy_min_phishing);
  analyze->add_option("--top-k", o.top_k);

  auto* detect = app.add_subcommand("detect", "score every record with the sliding-window detector");
  add_common(detect, o);
  detect->add_option("--state", o.state, "detector state file (read if present, then rewritten)");
  detect->add_option("--window-days", o.window_days);
  detect->add_option("--min-phishing", o.min_phishing);
  detect->add_option("--risk-threshold", o.risk_threshold);
  detect->add_option("--smoothing", o.smoothing);
  detect->add_flag("--export-features", o.export_features, "also write features.csv");

  auto* validate = app.add_subcommand("validate-paths", "check relay paths against MX-observed senders");
  add_common(validate, o);

  std::string spec_path;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus and fixture tables");
  synth->add_option("spec", spec_path, "scenario JSON")->required();
  synth->add_option("-o,--output", synth_out, "output directory");

  auto* check = app.add_subcommand("check-config", "validate and print the effective config");
  add_common(check, o);
  check->add_option("--state", o.state);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto n = cmd_synth(spec_path, synth_out);
      std::cout << "wrote " << n << " records to " << synth_out << "\n";
      return 0;
    }
    const auto cfg = resolve_config(o);
    if (analyze->parsed()) {
      const auto s = cmd_analyze(cfg);
      std::cout << "analyzed " << s.records << " records (" << s.skipped << " skipped), "
                << s.periods.size() << " periods, " << s.files.size() << " files in "
                << cfg.output_dir.string() << "\n";
    } else if (detect->parsed()) {
      const auto s = cmd_detect(cfg);
      std::cout << "scored " << s.records << " records (" << s.skipped << " skipped): " << s.flagged
                << " flagged, " << s.unscored << " without origin, " << s.stale << " stale\n";
    } else if (validate->parsed()) {
      const auto s = cmd_validate_paths(cfg);
      std::cout << "validated " << s.records << " records (" << s.skipped << " skipped)";
      for (const auto& [v, n] : s.by_verdict) std::cout << ", " << to_string(v) << "=" << n;
      std::cout << "\n";
    } else if (check->parsed()) {
      validate_config(cfg, Command::CheckConfig);
      std::cout << config_to_json(cfg) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
