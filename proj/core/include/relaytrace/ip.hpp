#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace relaytrace {

enum class IpFamily : std::uint8_t { V4 = 4, V6 = 6 };

// An IPv4 or IPv6 address stored in network byte order. IPv4 addresses use
// the first four bytes; the remainder is zero.
class IpAddress {
 public:
  IpAddress() = default;

  static std::optional<IpAddress> parse(std::string_view text);
  static IpAddress v4(std::uint32_t host_order);
  static IpAddress v6(const std::array<std::uint8_t, 16>& bytes);

  IpFamily family() const noexcept { return family_; }
  bool is_v4() const noexcept { return family_ == IpFamily::V4; }
  int bit_width() const noexcept { return is_v4() ? 32 : 128; }

  // Bit `index` counted from the most significant bit.
  bool bit(int index) const noexcept {
    return (bytes_[index / 8] >> (7 - index % 8)) & 1u;
  }

  std::uint32_t v4_value() const noexcept;
  const std::array<std::uint8_t, 16>& bytes() const noexcept { return bytes_; }

  // Address with every bit past `prefix_len` cleared.
  IpAddress masked(int prefix_len) const noexcept;

  std::string to_string() const;

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
  friend bool operator==(const IpAddress&, const IpAddress&) = default;

 private:
  IpFamily family_ = IpFamily::V4;
  std::array<std::uint8_t, 16> bytes_{};
};

// False for loopback, private, link-local, CGNAT, documentation, benchmark,
// multicast, reserved and unspecified ranges (v4 and v6); true otherwise.
bool is_public_routable(const IpAddress& ip) noexcept;

}  // namespace relaytrace

template <>
struct std::hash<relaytrace::IpAddress> {
  std::size_t operator()(const relaytrace::IpAddress& ip) const noexcept {
    // FNV-1a over family + bytes
    std::uint64_t h = 1469598103934665603ull ^ static_cast<std::uint8_t>(ip.family());
    h *= 1099511628211ull;
    for (auto b : ip.bytes()) {
      h ^= b;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};
