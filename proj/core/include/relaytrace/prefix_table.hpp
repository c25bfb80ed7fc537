#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relaytrace/errors.hpp"
#include "relaytrace/ip.hpp"

namespace relaytrace {

struct Cidr {
  IpAddress network;  // host bits cleared
  int length = 0;

  static std::optional<Cidr> parse(std::string_view text);
  bool contains(const IpAddress& ip) const noexcept {
    return ip.family() == network.family() && ip.masked(length) == network;
  }
  std::string to_string() const;

  friend auto operator<=>(const Cidr&, const Cidr&) = default;
  friend bool operator==(const Cidr&, const Cidr&) = default;
};

// Longest-prefix-match table over mixed v4/v6 prefixes, backed by one binary
// trie per address family. Immutable after loading; lookups are read-only.
template <typename Payload>
class PrefixTable {
 public:
  // Throws DuplicatePrefix if the exact prefix is already present.
  void insert(const Cidr& prefix, Payload payload) {
    auto& trie = prefix.network.is_v4() ? v4_ : v6_;
    if (trie.empty()) trie.emplace_back();
    std::uint32_t node = 0;
    for (int i = 0; i < prefix.length; ++i) {
      const int b = prefix.network.bit(i) ? 1 : 0;
      if (trie[node].child[b] == kNone) {
        trie[node].child[b] = static_cast<std::uint32_t>(trie.size());
        trie.emplace_back();
      }
      node = trie[node].child[b];
    }
    if (trie[node].entry != kNone) throw DuplicatePrefix(prefix.to_string());
    trie[node].entry = static_cast<std::uint32_t>(entries_.size());
    entries_.emplace_back(prefix, std::move(payload));
  }

  const Payload* lookup(const IpAddress& ip) const noexcept {
    const auto* match = lookup_entry(ip);
    return match ? &match->second : nullptr;
  }

  std::optional<Payload> find(const IpAddress& ip) const {
    if (const auto* p = lookup(ip)) return *p;
    return std::nullopt;
  }

  // Matching prefix and payload, or nullptr.
  const std::pair<Cidr, Payload>* lookup_entry(const IpAddress& ip) const noexcept {
    const auto& trie = ip.is_v4() ? v4_ : v6_;
    if (trie.empty()) return nullptr;
    std::uint32_t node = 0;
    std::uint32_t best = trie[0].entry;
    const int width = ip.bit_width();
    for (int i = 0; i < width; ++i) {
      node = trie[node].child[ip.bit(i) ? 1 : 0];
      if (node == kNone) break;
      if (trie[node].entry != kNone) best = trie[node].entry;
    }
    return best == kNone ? nullptr : &entries_[best];
  }

  const std::vector<std::pair<Cidr, Payload>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;
  struct Node {
    std::uint32_t child[2] = {kNone, kNone};
    std::uint32_t entry = kNone;
  };
  std::vector<Node> v4_;
  std::vector<Node> v6_;
  std::vector<std::pair<Cidr, Payload>> entries_;
};

}  // namespace relaytrace
