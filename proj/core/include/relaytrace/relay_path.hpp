#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relaytrace/ingest.hpp"
#include "relaytrace/ip.hpp"
#include "relaytrace/time.hpp"

namespace relaytrace {

struct RelayHop {
  std::optional<IpAddress> from_ip;
  std::optional<std::string> from_host;
  std::optional<IpAddress> by_ip;
  std::optional<std::string> by_host;
  std::optional<Timestamp> hop_timestamp;
  std::string raw;

  // False when none of the from/by fields could be extracted.
  bool parsed() const noexcept { return from_ip || from_host || by_ip || by_host; }
};

// Hops ordered earliest to latest (the reverse of header order).
struct RelayPath {
  std::vector<RelayHop> hops;
  std::optional<IpAddress> origin_ip;
  std::optional<std::size_t> origin_index;
  std::size_t length = 0;  // RECEIVED headers before any filtering
};

// Tolerant trace-field parser: the first IP literal (dotted quad or
// bracketed v6, optional "IPv6:" tag) after the "from" and "by" keywords,
// hostnames when present, and the date after the final ';'. Never throws.
RelayHop parse_received(std::string_view value);

bool is_received_header(const Header& h) noexcept;

RelayPath build_path(const EmailRecord& record);
std::size_t path_length(const EmailRecord& record);

// from_ip of every hop with a public from_ip, earliest first.
std::vector<IpAddress> public_ip_sequence(const RelayPath& path);

}  // namespace relaytrace
