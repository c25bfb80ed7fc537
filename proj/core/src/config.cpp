#include "relaytrace/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "relaytrace/errors.hpp"

namespace relaytrace {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> keys) {
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    (void)v;
    if (!allowed.count(k)) throw ConfigError(prefix + k, "unknown key");
  }
}

const json& object_at(const json& parent, const char* key, const std::string& field) {
  const auto& v = parent.at(key);
  if (!v.is_object()) throw ConfigError(field, "expected an object");
  return v;
}

fs::path resolve(const json& v, const std::string& field, const fs::path& base) {
  if (!v.is_string() || v.get<std::string>().empty()) throw ConfigError(field, "expected a path string");
  fs::path p = v.get<std::string>();
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

template <typename T>
T number(const json& v, const std::string& field) {
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    return v.get<T>();
  } else {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(field, "expected a non-negative integer");
    }
    return static_cast<T>(v.get<long long>());
  }
}

std::vector<std::string> strings(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw ConfigError(field, "expected an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

void require_file(const std::optional<fs::path>& p, const std::string& field) {
  if (!p) throw ConfigError(field, "required but not set");
  if (!fs::is_regular_file(*p)) throw ConfigError(field, "file not found: " + p->string());
}

}  // namespace

bool is_period_label(std::string_view s) noexcept {
  if (s.size() != 7 || s[4] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u}) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  const int month = (s[5] - '0') * 10 + (s[6] - '0');
  return month >= 1 && month <= 12;
}

RunConfig parse_config(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
  reject_unknown(doc, "", {"corpus", "tables", "periods", "analytics", "detector", "output_dir",
                           "shard_count", "state_path", "export_features", "comparison_orgs"});

  RunConfig cfg;
  if (doc.contains("corpus")) {
    const auto& c = doc["corpus"];
    if (c.is_string()) {
      cfg.corpus.push_back(resolve(c, "corpus", base_dir));
    } else if (c.is_array()) {
      for (const auto& e : c) cfg.corpus.push_back(resolve(e, "corpus", base_dir));
    } else {
      throw ConfigError("corpus", "expected a path or an array of paths");
    }
  }
  if (doc.contains("tables")) {
    const auto& t = object_at(doc, "tables", "tables");
    reject_unknown(t, "tables.", {"asn", "geo", "geo_fallback", "provider", "mx"});
    const auto opt = [&](const char* key) -> std::optional<fs::path> {
      if (!t.contains(key) || t[key].is_null()) return std::nullopt;
      return resolve(t[key], std::string("tables.") + key, base_dir);
    };
    cfg.tables = {opt("asn"), opt("geo"), opt("geo_fallback"), opt("provider"), opt("mx")};
  }
  if (doc.contains("periods")) cfg.periods = strings(doc["periods"], "periods");
  if (doc.contains("analytics")) {
    const auto& a = object_at(doc, "analytics", "analytics");
    reject_unknown(a, "analytics.", {"country_min_total", "yoy_min_phishing", "top_k", "concentration"});
    if (a.contains("country_min_total")) {
      cfg.analytics.country_min_total = number<std::uint64_t>(a["country_min_total"], "analytics.country_min_total");
    }
    if (a.contains("yoy_min_phishing")) {
      cfg.analytics.yoy_min_phishing = number<std::uint64_t>(a["yoy_min_phishing"], "analytics.yoy_min_phishing");
    }
    if (a.contains("top_k")) cfg.analytics.top_k = number<std::size_t>(a["top_k"], "analytics.top_k");
    if (a.contains("concentration")) {
      const auto& c = object_at(a, "concentration", "analytics.concentration");
      reject_unknown(c, "analytics.concentration.", {"medium_from", "high_from", "min_high_phishing"});
      auto& t = cfg.analytics.concentration;
      if (c.contains("medium_from")) t.medium_from = number<double>(c["medium_from"], "analytics.concentration.medium_from");
      if (c.contains("high_from")) t.high_from = number<double>(c["high_from"], "analytics.concentration.high_from");
      if (c.contains("min_high_phishing")) {
        t.min_high_phishing = number<std::uint64_t>(c["min_high_phishing"], "analytics.concentration.min_high_phishing");
      }
    }
  }
  if (doc.contains("detector")) {
    const auto& d = object_at(doc, "detector", "detector");
    reject_unknown(d, "detector.", {"window_days", "min_phishing", "risk_threshold", "smoothing"});
    auto& p = cfg.detector;
    if (d.contains("window_days")) p.window_days = number<int>(d["window_days"], "detector.window_days");
    if (d.contains("min_phishing")) p.min_phishing = number<std::uint64_t>(d["min_phishing"], "detector.min_phishing");
    if (d.contains("risk_threshold")) p.risk_threshold = number<double>(d["risk_threshold"], "detector.risk_threshold");
    if (d.contains("smoothing")) p.smoothing = number<double>(d["smoothing"], "detector.smoothing");
  }
  if (doc.contains("output_dir")) cfg.output_dir = resolve(doc["output_dir"], "output_dir", base_dir);
  else cfg.output_dir = (base_dir / cfg.output_dir).lexically_normal();
  if (doc.contains("shard_count")) cfg.shard_count = number<std::size_t>(doc["shard_count"], "shard_count");
  if (doc.contains("state_path") && !doc["state_path"].is_null()) {
    cfg.state_path = resolve(doc["state_path"], "state_path", base_dir);
  }
  if (doc.contains("export_features")) {
    if (!doc["export_features"].is_boolean()) throw ConfigError("export_features", "expected a boolean");
    cfg.export_features = doc["export_features"].get<bool>();
  }
  if (doc.contains("comparison_orgs")) cfg.comparison_orgs = strings(doc["comparison_orgs"], "comparison_orgs");
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

void validate_config(const RunConfig& cfg, Command command) {
  try {
    cfg.detector.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("detector." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
  const auto& t = cfg.analytics.concentration;
  if (!(t.medium_from > 0.0 && t.medium_from <= t.high_from && t.high_from <= 1.0)) {
    throw ConfigError("analytics.concentration", "need 0 < medium_from <= high_from <= 1");
  }
  if (cfg.analytics.top_k < 1) throw ConfigError("analytics.top_k", "must be >= 1");
  if (cfg.shard_count < 1 || cfg.shard_count > 256) throw ConfigError("shard_count", "must be in [1, 256]");
  for (const auto& p : cfg.periods) {
    if (!is_period_label(p)) throw ConfigError("periods", "bad period label '" + p + "'");
  }

  if (command == Command::CheckConfig) {
    // Only paths that were given are checked.
    for (const auto& c : cfg.corpus) require_file(c, "corpus");
    const std::pair<const std::optional<fs::path>*, const char*> all[] = {
        {&cfg.tables.asn, "tables.asn"},           {&cfg.tables.geo, "tables.geo"},
        {&cfg.tables.geo_fallback, "tables.geo_fallback"},
        {&cfg.tables.provider, "tables.provider"}, {&cfg.tables.mx, "tables.mx"}};
    for (const auto& [p, name] : all) {
      if (*p) require_file(*p, name);
    }
    return;
  }

  if (cfg.corpus.empty()) throw ConfigError("corpus", "required but not set");
  for (const auto& c : cfg.corpus) require_file(c, "corpus");
  switch (command) {
    case Command::Analyze:
      require_file(cfg.tables.asn, "tables.asn");
      require_file(cfg.tables.geo, "tables.geo");
      break;
    case Command::ValidatePaths:
      require_file(cfg.tables.asn, "tables.asn");
      require_file(cfg.tables.mx, "tables.mx");
      break;
    case Command::Detect:
      if (cfg.export_features) {
        require_file(cfg.tables.asn, "tables.asn");
        require_file(cfg.tables.geo, "tables.geo");
      }
      break;
    case Command::CheckConfig:
      break;
  }
  if (cfg.tables.geo_fallback) require_file(cfg.tables.geo_fallback, "tables.geo_fallback");
  if (cfg.tables.provider) require_file(cfg.tables.provider, "tables.provider");
  if (cfg.tables.mx) require_file(cfg.tables.mx, "tables.mx");
}

std::string config_to_json(const RunConfig& cfg) {
  json doc;
  doc["corpus"] = json::array();
  for (const auto& c : cfg.corpus) doc["corpus"].push_back(c.string());
  json tables = json::object();
  const auto put = [&](const char* key, const std::optional<fs::path>& p) {
    tables[key] = p ? json(p->string()) : json(nullptr);
  };
  put("asn", cfg.tables.asn);
  put("geo", cfg.tables.geo);
  put("geo_fallback", cfg.tables.geo_fallback);
  put("provider", cfg.tables.provider);
  put("mx", cfg.tables.mx);
  doc["tables"] = tables;
  doc["periods"] = cfg.periods;
  doc["analytics"] = {{"country_min_total", cfg.analytics.country_min_total},
                      {"yoy_min_phishing", cfg.analytics.yoy_min_phishing},
                      {"top_k", cfg.analytics.top_k},
                      {"concentration",
                       {{"medium_from", cfg.analytics.concentration.medium_from},
                        {"high_from", cfg.analytics.concentration.high_from},
                        {"min_high_phishing", cfg.analytics.concentration.min_high_phishing}}}};
  doc["detector"] = {{"window_days", cfg.detector.window_days},
                     {"min_phishing", cfg.detector.min_phishing},
                     {"risk_threshold", cfg.detector.risk_threshold},
                     {"smoothing", cfg.detector.smoothing}};
  doc["output_dir"] = cfg.output_dir.string();
  doc["shard_count"] = cfg.shard_count;
  doc["state_path"] = cfg.state_path ? json(cfg.state_path->string()) : json(nullptr);
  doc["export_features"] = cfg.export_features;
  doc["comparison_orgs"] = cfg.comparison_orgs;
  return doc.dump(2);
}

}  // namespace relaytrace
