#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "relaytrace/analytics.hpp"
#include "relaytrace/detector.hpp"
#include "relaytrace/enrich.hpp"
#include "relaytrace/errors.hpp"
#include "relaytrace/relay_path.hpp"

using namespace relaytrace;

namespace {

AsnTable make_table(std::size_t prefixes) {
  AsnTable t;
  std::mt19937 rng(1);
  for (std::size_t i = 0; i < prefixes; ++i) {
    const auto len = static_cast<std::uint8_t>(12 + rng() % 13);
    const auto base = static_cast<std::uint32_t>(rng());
    auto c = Cidr::parse(IpAddress::v4(base).to_string() + "/" + std::to_string(len));
    if (!c) continue;
    try {
      t.insert(*c, AsnInfo{static_cast<std::uint32_t>(i), "as"});
    } catch (const DuplicatePrefix&) {
    }
  }
  return t;
}

}  // namespace

static void BM_PrefixLookup(benchmark::State& state) {
  const auto table = make_table(static_cast<std::size_t>(state.range(0)));
  std::mt19937 rng(2);
  std::vector<IpAddress> probes;
  for (int i = 0; i < 4096; ++i) probes.push_back(IpAddress::v4(static_cast<std::uint32_t>(rng())));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(table.lookup(probes[i++ & 4095]));
  }
}
BENCHMARK(BM_PrefixLookup)->Arg(1000)->Arg(100000);

static void BM_ParseReceived(benchmark::State& state) {
  const std::string header =
      "from mail-sor-f41.google.com (mail-sor-f41.google.com [209.85.220.41]) by mx.corp.example "
      "(Postfix) with ESMTPS id 4F1B2C3D4E for <user@corp.example>; Tue, 12 Jan 2021 08:01:02 +0000";
  for (auto _ : state) benchmark::DoNotOptimize(parse_received(header));
}
BENCHMARK(BM_ParseReceived);

static void BM_DetectorProcess(benchmark::State& state) {
  Detector det{DetectorParams{}};
  std::mt19937_64 rng(3);
  std::int64_t t = 1609459200;
  for (auto _ : state) {
    const auto ip = IpAddress::v4(0x0C000000u + static_cast<std::uint32_t>(rng() % 20000));
    t += 4;
    benchmark::DoNotOptimize(det.process(ip, Timestamp{std::chrono::seconds(t)}, rng() % 5 ? Label::Clean : Label::Phishing));
  }
}
BENCHMARK(BM_DetectorProcess);

static void BM_NormalizeSubject(benchmark::State& state) {
  const std::string subject = "Re: [EXTERNAL] Überweisung #4421 fällig - Action Required!";
  for (auto _ : state) benchmark::DoNotOptimize(normalize_subject(subject));
}
BENCHMARK(BM_NormalizeSubject);

BENCHMARK_MAIN();
