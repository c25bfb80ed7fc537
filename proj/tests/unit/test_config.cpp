#include <doctest.h>

#include <fstream>

#include "relaytrace/config.hpp"
#include "relaytrace/errors.hpp"
#include "support.hpp"

using namespace relaytrace;
namespace fs = std::filesystem;

namespace {

std::string field_of(const std::string& text, const fs::path& base = "/base") {
  try {
    parse_config(text, base);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string validate_field(const RunConfig& cfg, Command cmd) {
  try {
    validate_config(cfg, cmd);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

void touch(const fs::path& p) { std::ofstream(p) << "x\n"; }

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(R"({
    "corpus": ["a.jsonl", "/abs/b.jsonl"],
    "tables": {"asn": "t/asn.csv", "mx": "mx.csv"},
    "periods": ["2021-01"],
    "analytics": {"top_k": 5, "concentration": {"high_from": 0.05}},
    "detector": {"window_days": 7, "risk_threshold": 0.8},
    "shard_count": 4,
    "export_features": true
  })",
                                "/base");
  REQUIRE(cfg.corpus.size() == 2);
  CHECK(cfg.corpus[0] == fs::path("/base/a.jsonl"));
  CHECK(cfg.corpus[1] == fs::path("/abs/b.jsonl"));
  CHECK(*cfg.tables.asn == fs::path("/base/t/asn.csv"));
  CHECK_FALSE(cfg.tables.geo);
  CHECK(cfg.analytics.top_k == 5);
  CHECK(cfg.analytics.concentration.high_from == 0.05);
  CHECK(cfg.analytics.concentration.medium_from == 0.001);
  CHECK(cfg.detector.window_days == 7);
  CHECK(cfg.detector.min_phishing == 10);
  CHECK(cfg.shard_count == 4);
  CHECK(cfg.export_features);
  CHECK(cfg.output_dir == fs::path("/base/out"));

  const auto single = parse_config(R"({"corpus": "one.jsonl"})", "/b");
  CHECK(single.corpus == std::vector<fs::path>{"/b/one.jsonl"});
}

TEST_CASE("config errors name the field") {
  CHECK(field_of(R"({"bogus": 1})") == "bogus");
  CHECK(field_of(R"({"tables": {"asnn": "x"}})") == "tables.asnn");
  CHECK(field_of(R"({"detector": {"window": 3}})") == "detector.window");
  CHECK(field_of(R"({"detector": {"window_days": "x"}})") == "detector.window_days");
  CHECK(field_of(R"({"analytics": {"concentration": {"low": 1}}})") == "analytics.concentration.low");
  CHECK(field_of(R"({"export_features": 1})") == "export_features");
  CHECK(field_of(R"({"corpus": 5})") == "corpus");
  CHECK(field_of("{not json") == "config");
  CHECK(field_of("[]") == "config");
}

TEST_CASE("config validation") {
  rt_test::TempDir dir("config");
  touch(dir.path() / "c.jsonl");
  touch(dir.path() / "asn.csv");
  touch(dir.path() / "geo.csv");

  RunConfig cfg;
  cfg.corpus = {dir.path() / "c.jsonl"};
  cfg.tables.geo = dir.path() / "geo.csv";
  CHECK(validate_field(cfg, Command::Analyze) == "tables.asn");
  CHECK(validate_field(cfg, Command::Detect) == "");
  CHECK(validate_field(cfg, Command::CheckConfig) == "");

  cfg.tables.asn = dir.path() / "asn.csv";
  CHECK(validate_field(cfg, Command::Analyze) == "");
  CHECK(validate_field(cfg, Command::ValidatePaths) == "tables.mx");

  cfg.tables.provider = dir.path() / "missing.csv";
  CHECK(validate_field(cfg, Command::Analyze) == "tables.provider");
  CHECK(validate_field(cfg, Command::CheckConfig) == "tables.provider");
  cfg.tables.provider.reset();

  auto bad = cfg;
  bad.detector.window_days = 91;
  CHECK(validate_field(bad, Command::Analyze) == "detector.window_days");
  bad = cfg;
  bad.detector.risk_threshold = 0.0;
  CHECK(validate_field(bad, Command::Detect) == "detector.risk_threshold");
  bad = cfg;
  bad.detector.min_phishing = 0;
  CHECK(validate_field(bad, Command::Detect) == "detector.min_phishing");
  bad = cfg;
  bad.detector.smoothing = -1;
  CHECK(validate_field(bad, Command::Detect) == "detector.smoothing");
  bad = cfg;
  bad.shard_count = 0;
  CHECK(validate_field(bad, Command::Analyze) == "shard_count");
  bad = cfg;
  bad.analytics.concentration.medium_from = 0.5;
  CHECK(validate_field(bad, Command::Analyze) == "analytics.concentration");
  bad = cfg;
  bad.periods = {"2021-13"};
  CHECK(validate_field(bad, Command::Analyze) == "periods");
  bad = cfg;
  bad.corpus.clear();
  CHECK(validate_field(bad, Command::Analyze) == "corpus");
  bad = cfg;
  bad.export_features = true;
  bad.tables.geo.reset();
  CHECK(validate_field(bad, Command::Detect) == "tables.geo");
}

TEST_CASE("period labels") {
  CHECK(is_period_label("2021-01"));
  CHECK(is_period_label("2020-12"));
  CHECK_FALSE(is_period_label("2021-00"));
  CHECK_FALSE(is_period_label("2021-1"));
  CHECK_FALSE(is_period_label("21-01"));
  CHECK_FALSE(is_period_label("2021-01-01"));
}

TEST_CASE("config echo is stable") {
  const auto a = parse_config(R"({"corpus": "x", "shard_count": 2})", "/b");
  const auto b = parse_config(R"({"shard_count": 2, "corpus": ["x"]})", "/b");
  CHECK(config_to_json(a) == config_to_json(b));
  const auto c = parse_config(R"({"corpus": "x", "shard_count": 3})", "/b");
  CHECK(config_to_json(a) != config_to_json(c));
}
