#include <fstream>

#include "doctest.h"
#include "relaytrace/errors.hpp"
#include "relaytrace/ingest.hpp"
#include "support.hpp"

using namespace relaytrace;

namespace {

const char* kGood =
    R"({"message_id":"<a@x>","delivered_at":"2021-01-05T10:00:00Z","label":"phishing",)"
    R"("headers":[["Received","from a (1.1.1.1) by b (2.2.2.2); Tue, 5 Jan 2021 10:00:00 +0000"]],)"
    R"("recipient_domain":"Corp.Example","org_id":"o1","subject":"Hi","from_email":"x@y.z",)"
    R"("auth":{"spf":"pass","dkim":"fail"}})";

}  // namespace

TEST_CASE("parse_record reads required and optional fields") {
  const auto r = parse_record(kGood);
  CHECK(r.message_id == "<a@x>");
  CHECK(r.label == Label::Phishing);
  CHECK(r.recipient_domain == "corp.example");
  CHECK(r.raw_headers.size() == 1);
  CHECK(r.auth.spf == AuthState::Pass);
  CHECK(r.auth.dkim == AuthState::Fail);
  CHECK(r.auth.dmarc == AuthState::None);
  CHECK(r.org_id == "o1");
}

TEST_CASE("serialize_record round trips") {
  const auto r = parse_record(kGood);
  CHECK(parse_record(serialize_record(r)) == r);
}

TEST_CASE("parse_record rejects missing or mistyped fields") {
  const char* bad[] = {
      "not json",
      "[1,2]",
      R"({"delivered_at":"2021-01-05T10:00:00Z","label":"clean","headers":[],"recipient_domain":"d"})",
      R"({"message_id":"","delivered_at":"2021-01-05T10:00:00Z","label":"clean","headers":[],"recipient_domain":"d"})",
      R"({"message_id":"m","delivered_at":"2021-01-05","label":"clean","headers":[],"recipient_domain":"d"})",
      R"({"message_id":"m","delivered_at":"2021-01-05T10:00:00Z","label":"spam","headers":[],"recipient_domain":"d"})",
      R"({"message_id":"m","delivered_at":"2021-01-05T10:00:00Z","label":"clean","recipient_domain":"d"})",
      R"({"message_id":"m","delivered_at":"2021-01-05T10:00:00Z","label":"clean","headers":[["a"]],"recipient_domain":"d"})",
      R"({"message_id":"m","delivered_at":"2021-01-05T10:00:00Z","label":"clean","headers":[]})",
      R"({"message_id":"m","delivered_at":"2021-01-05T10:00:00Z","label":"clean","headers":[],"recipient_domain":"d","auth":{"spf":"maybe"}})",
      R"({"message_id":7,"delivered_at":"2021-01-05T10:00:00Z","label":"clean","headers":[],"recipient_domain":"d"})",
  };
  for (const char* line : bad) {
    INFO(line);
    CHECK_THROWS_AS(parse_record(line), MalformedRecord);
  }
}

TEST_CASE("raw header blocks unfold continuation lines") {
  const auto h = parse_raw_header_block(
      "Received: from a.example (a.example [1.1.1.1])\r\n"
      "\tby b.example (2.2.2.2);\r\n"
      "  Tue, 5 Jan 2021 10:00:00 +0000\r\n"
      "Subject: hello\r\n"
      "\r\n"
      "body: not a header\r\n");
  REQUIRE(h.size() == 2);
  CHECK(h[0].name == "Received");
  CHECK(h[0].value == "from a.example (a.example [1.1.1.1]) by b.example (2.2.2.2); Tue, 5 Jan 2021 10:00:00 +0000");
  CHECK(h[1].value == "hello");
}

TEST_CASE("raw header block errors carry the line number") {
  try {
    parse_raw_header_block("Subject: a\nno colon here\n");
    FAIL("expected MalformedHeader");
  } catch (const MalformedHeader& e) {
    CHECK(e.line_no() == 2);
  }
  CHECK_THROWS_AS(parse_raw_header_block("  leading continuation\n"), MalformedHeader);
}

TEST_CASE("header_block may replace headers") {
  const auto r = parse_record(
      R"({"message_id":"m","delivered_at":"2021-01-05T10:00:00Z","label":"clean","recipient_domain":"d",)"
      R"("header_block":"Received: from a (1.1.1.1)\n by b (2.2.2.2)\n"})");
  REQUIRE(r.raw_headers.size() == 1);
  CHECK(r.raw_headers[0].value == "from a (1.1.1.1) by b (2.2.2.2)");
}

TEST_CASE("corpus reader skips and counts malformed lines") {
  rt_test::TempDir dir("ingest");
  const auto path = dir.path() / "c.jsonl";
  {
    std::ofstream f(path);
    f << kGood << "\n\n{broken\n" << kGood << "\n   \n" << R"({"message_id":"x"})" << "\n";
  }
  CorpusReader reader(path);
  int n = 0;
  while (reader.next()) ++n;
  CHECK(n == 2);
  CHECK(reader.skip_count() == 2);
  REQUIRE(reader.skipped().size() == 2);
  CHECK(reader.skipped()[0].first == 3);
  CHECK(reader.skipped()[1].first == 6);

  const auto load = read_corpus(path);
  CHECK(load.records.size() == 2);
  CHECK(load.skip_count == 2);
  CHECK_THROWS_AS(CorpusReader(dir.path() / "missing.jsonl"), IoError);
}
