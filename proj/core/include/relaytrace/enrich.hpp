#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relaytrace/ip.hpp"
#include "relaytrace/prefix_table.hpp"
#include "relaytrace/relay_path.hpp"

namespace relaytrace {

struct AsnInfo {
  std::uint32_t asn = 0;
  std::string owner;

  friend bool operator==(const AsnInfo&, const AsnInfo&) = default;
};

using AsnTable = PrefixTable<AsnInfo>;
using GeoTable = PrefixTable<std::string>;       // ISO 3166-1 alpha-2
using ProviderTable = PrefixTable<std::string>;  // e.g. "ec2", "azure", "o365"

// CSV loaders. A leading "prefix,..." header row is skipped. Throws IoError,
// ParseError (naming the line) or DuplicatePrefix.
AsnTable load_asn_table(const std::filesystem::path& path);
GeoTable load_geo_table(const std::filesystem::path& path);
ProviderTable load_provider_table(const std::filesystem::path& path);

std::optional<AsnInfo> lookup_asn(const IpAddress& ip, const AsnTable& table);
std::optional<std::string> lookup_country(const IpAddress& ip, const GeoTable& table);
std::optional<std::string> provider_tag(const IpAddress& ip, const ProviderTable& table);

// Primary geolocation table with an optional fallback consulted on a miss.
class GeoLookup {
 public:
  GeoLookup() = default;
  explicit GeoLookup(const GeoTable* primary, const GeoTable* fallback = nullptr)
      : primary_(primary), fallback_(fallback) {}

  std::optional<std::string> country(const IpAddress& ip) const;

 private:
  const GeoTable* primary_ = nullptr;
  const GeoTable* fallback_ = nullptr;
};

struct CountryRoute {
  std::vector<std::string> countries;  // consecutive duplicates collapsed
  std::size_t unknown_hops = 0;

  friend bool operator==(const CountryRoute&, const CountryRoute&) = default;
};

// Uses each hop's public from_ip, earliest first.
CountryRoute country_route(const RelayPath& path, const GeoLookup& geo);
CountryRoute country_route(const RelayPath& path, const GeoTable& geo);

std::size_t distinct_countries(const RelayPath& path, const GeoLookup& geo);
std::size_t distinct_countries(const RelayPath& path, const GeoTable& geo);

// "DE>US"; empty string for an empty route.
std::string route_key(const CountryRoute& route);

}  // namespace relaytrace
