#include "relaytrace/enrich.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "relaytrace/csv.hpp"

namespace relaytrace {

std::optional<Cidr> Cidr::parse(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  const auto slash = text.find('/');
  auto ip = IpAddress::parse(text.substr(0, slash));
  if (!ip) return std::nullopt;
  int len = ip->bit_width();
  if (slash != std::string_view::npos) {
    const auto digits = text.substr(slash + 1);
    if (digits.empty() || digits.size() > 3) return std::nullopt;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), len);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    if (len < 0 || len > ip->bit_width()) return std::nullopt;
  }
  return Cidr{ip->masked(len), len};
}

std::string Cidr::to_string() const { return network.to_string() + "/" + std::to_string(length); }

namespace {

template <typename Payload, typename Make>
PrefixTable<Payload> load_table(const std::filesystem::path& path, std::size_t min_fields,
                                Make make) {
  PrefixTable<Payload> table;
  bool first = true;
  csv::for_each_row(path, [&](const std::vector<std::string>& f, std::size_t line_no) {
    const bool header_row = first && !f.empty() && iequals(f[0], "prefix");
    first = false;
    if (header_row) return;
    const auto where = path.filename().string() + ":" + std::to_string(line_no);
    if (f.size() < min_fields) throw ParseError(where + ": expected " + std::to_string(min_fields) + " fields");
    auto cidr = Cidr::parse(f[0]);
    if (!cidr) throw ParseError(where + ": bad prefix '" + f[0] + "'");
    table.insert(*cidr, make(f, where));
  });
  return table;
}

std::string trimmed(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

AsnTable load_asn_table(const std::filesystem::path& path) {
  return load_table<AsnInfo>(path, 2, [](const std::vector<std::string>& f, const std::string& where) {
    AsnInfo info;
    auto s = trimmed(f[1]);
    if (s.size() > 2 && (s[0] == 'A' || s[0] == 'a') && (s[1] == 'S' || s[1] == 's')) s = s.substr(2);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), info.asn);
    if (ec != std::errc{} || ptr != s.data() + s.size() || info.asn == 0) {
      throw ParseError(where + ": bad asn '" + f[1] + "'");
    }
    if (f.size() > 2) info.owner = trimmed(f[2]);
    return info;
  });
}

GeoTable load_geo_table(const std::filesystem::path& path) {
  return load_table<std::string>(path, 2, [](const std::vector<std::string>& f, const std::string& where) {
    auto cc = trimmed(f[1]);
    if (cc.size() != 2 || !std::isalpha(static_cast<unsigned char>(cc[0])) ||
        !std::isalpha(static_cast<unsigned char>(cc[1]))) {
      throw ParseError(where + ": bad country code '" + f[1] + "'");
    }
    for (auto& c : cc) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return cc;
  });
}

ProviderTable load_provider_table(const std::filesystem::path& path) {
  return load_table<std::string>(path, 2, [](const std::vector<std::string>& f, const std::string& where) {
    auto tag = trimmed(f[1]);
    if (tag.empty()) throw ParseError(where + ": empty provider tag");
    return tag;
  });
}

std::optional<AsnInfo> lookup_asn(const IpAddress& ip, const AsnTable& table) { return table.find(ip); }

std::optional<std::string> lookup_country(const IpAddress& ip, const GeoTable& table) {
  return table.find(ip);
}

std::optional<std::string> provider_tag(const IpAddress& ip, const ProviderTable& table) {
  return table.find(ip);
}

std::optional<std::string> GeoLookup::country(const IpAddress& ip) const {
  if (primary_) {
    if (const auto* cc = primary_->lookup(ip)) return *cc;
  }
  if (fallback_) {
    if (const auto* cc = fallback_->lookup(ip)) return *cc;
  }
  return std::nullopt;
}

CountryRoute country_route(const RelayPath& path, const GeoLookup& geo) {
  CountryRoute route;
  for (const auto& hop : path.hops) {
    if (!hop.from_ip || !is_public_routable(*hop.from_ip)) continue;
    auto cc = geo.country(*hop.from_ip);
    if (!cc) {
      ++route.unknown_hops;
      continue;
    }
    if (route.countries.empty() || route.countries.back() != *cc) {
      route.countries.push_back(std::move(*cc));
    }
  }
  return route;
}

CountryRoute country_route(const RelayPath& path, const GeoTable& geo) {
  return country_route(path, GeoLookup(&geo));
}

std::size_t distinct_countries(const RelayPath& path, const GeoLookup& geo) {
  const auto route = country_route(path, geo);
  return std::set<std::string>(route.countries.begin(), route.countries.end()).size();
}

std::size_t distinct_countries(const RelayPath& path, const GeoTable& geo) {
  return distinct_countries(path, GeoLookup(&geo));
}

std::string route_key(const CountryRoute& route) {
  std::string out;
  for (const auto& cc : route.countries) {
    if (!out.empty()) out.push_back('>');
    out += cc;
  }
  return out;
}

}  // namespace relaytrace
