#include "relaytrace/ip.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cstring>

namespace relaytrace {

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
  if (text.empty() || text.size() > 64) return std::nullopt;
  std::string buf(text);
  IpAddress out;
  if (buf.find(':') == std::string::npos) {
    in_addr a4{};
    if (inet_pton(AF_INET, buf.c_str(), &a4) != 1) return std::nullopt;
    out.family_ = IpFamily::V4;
    std::memcpy(out.bytes_.data(), &a4, 4);
    return out;
  }
  in6_addr a6{};
  if (inet_pton(AF_INET6, buf.c_str(), &a6) != 1) return std::nullopt;
  out.family_ = IpFamily::V6;
  std::memcpy(out.bytes_.data(), &a6, 16);
  return out;
}

IpAddress IpAddress::v4(std::uint32_t host_order) {
  IpAddress out;
  out.family_ = IpFamily::V4;
  out.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
  out.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
  out.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
  out.bytes_[3] = static_cast<std::uint8_t>(host_order);
  return out;
}

IpAddress IpAddress::v6(const std::array<std::uint8_t, 16>& bytes) {
  IpAddress out;
  out.family_ = IpFamily::V6;
  out.bytes_ = bytes;
  return out;
}

std::uint32_t IpAddress::v4_value() const noexcept {
  return (std::uint32_t{bytes_[0]} << 24) | (std::uint32_t{bytes_[1]} << 16) |
         (std::uint32_t{bytes_[2]} << 8) | std::uint32_t{bytes_[3]};
}

IpAddress IpAddress::masked(int prefix_len) const noexcept {
  IpAddress out = *this;
  const int width = bit_width();
  prefix_len = std::clamp(prefix_len, 0, width);
  for (int byte = 0; byte < width / 8; ++byte) {
    const int keep = std::clamp(prefix_len - byte * 8, 0, 8);
    const auto mask = static_cast<std::uint8_t>(keep == 0 ? 0 : (0xFFu << (8 - keep)));
    out.bytes_[byte] &= mask;
  }
  return out;
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  if (is_v4()) {
    inet_ntop(AF_INET, bytes_.data(), buf, sizeof buf);
  } else {
    inet_ntop(AF_INET6, bytes_.data(), buf, sizeof buf);
  }
  return buf;
}

namespace {

struct Range {
  std::array<std::uint8_t, 16> net;
  int len;
};

bool in_range(const IpAddress& ip, const Range& r) {
  return ip.masked(r.len).bytes() == IpAddress::v6(r.net).masked(r.len).bytes();
}

constexpr std::uint32_t v4(int a, int b, int c, int d) {
  return (std::uint32_t(a) << 24) | (std::uint32_t(b) << 16) | (std::uint32_t(c) << 8) |
         std::uint32_t(d);
}

struct V4Range {
  std::uint32_t net;
  int len;
};

constexpr V4Range kV4NonPublic[] = {
    {v4(0, 0, 0, 0), 8},        // "this network"
    {v4(10, 0, 0, 0), 8},       // RFC1918
    {v4(100, 64, 0, 0), 10},    // CGNAT
    {v4(127, 0, 0, 0), 8},      // loopback
    {v4(169, 254, 0, 0), 16},   // link-local
    {v4(172, 16, 0, 0), 12},    // RFC1918
    {v4(192, 0, 0, 0), 24},     // IETF protocol assignments
    {v4(192, 0, 2, 0), 24},     // TEST-NET-1
    {v4(192, 88, 99, 0), 24},   // 6to4 relay anycast
    {v4(192, 168, 0, 0), 16},   // RFC1918
    {v4(198, 18, 0, 0), 15},    // benchmarking
    {v4(198, 51, 100, 0), 24},  // TEST-NET-2
    {v4(203, 0, 113, 0), 24},   // TEST-NET-3
    {v4(224, 0, 0, 0), 4},      // multicast
    {v4(240, 0, 0, 0), 4},      // reserved + broadcast
};

bool v4_public(std::uint32_t addr) {
  for (const auto& r : kV4NonPublic) {
    const std::uint32_t mask = r.len == 0 ? 0 : ~std::uint32_t{0} << (32 - r.len);
    if ((addr & mask) == r.net) return false;
  }
  return true;
}

const Range kV6NonPublic[] = {
    {{0}, 128},                                                   // unspecified
    {{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1}, 128},      // ::1
    {{0x01, 0x00}, 64},                                           // discard-only
    {{0x20, 0x01, 0x0d, 0xb8}, 32},                               // documentation
    {{0x3f, 0xff}, 20},                                           // documentation
    {{0xfc}, 7},                                                  // unique-local
    {{0xfe, 0x80}, 10},                                           // link-local
    {{0xfe, 0xc0}, 10},                                           // site-local (deprecated)
    {{0xff}, 8},                                                  // multicast
};

}  // namespace

bool is_public_routable(const IpAddress& ip) noexcept {
  if (ip.is_v4()) return v4_public(ip.v4_value());

  const auto& b = ip.bytes();
  // ::ffff:a.b.c.d is judged by the embedded v4 address
  const bool zero80 = std::all_of(b.begin(), b.begin() + 10, [](auto x) { return x == 0; });
  if (zero80 && b[10] == 0xff && b[11] == 0xff) {
    return v4_public((std::uint32_t{b[12]} << 24) | (std::uint32_t{b[13]} << 16) |
                     (std::uint32_t{b[14]} << 8) | b[15]);
  }
  for (const auto& r : kV6NonPublic) {
    if (in_range(ip, r)) return false;
  }
  return true;
}

}  // namespace relaytrace
