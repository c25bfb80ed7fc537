#include "relaytrace/relay_path.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace relaytrace {

namespace {

struct Word {
  std::size_t begin;
  std::size_t end;
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

constexpr std::array<std::string_view, 6> kKeywords = {"from", "by", "via", "with", "id", "for"};

bool is_keyword(std::string_view w) {
  return std::any_of(kKeywords.begin(), kKeywords.end(),
                     [&](std::string_view k) { return iequals(w, k); });
}

// Whitespace-separated words outside parentheses and brackets.
std::vector<Word> top_level_words(std::string_view s) {
  std::vector<Word> out;
  int paren = 0;
  int bracket = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '(') {
      ++paren;
      ++i;
      continue;
    }
    if (c == ')') {
      if (paren > 0) --paren;
      ++i;
      continue;
    }
    if (paren > 0) {
      ++i;
      continue;
    }
    if (c == '[') ++bracket;
    if (c == ']' && bracket > 0) --bracket;
    if (is_space(c) || bracket > 0 || c == '[' || c == ']') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j]) && s[j] != '(' && s[j] != '[') ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

// Position of the last ';' outside parentheses.
std::size_t last_top_level_semicolon(std::string_view s) {
  int depth = 0;
  std::size_t found = std::string_view::npos;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    else if (s[i] == ')' && depth > 0) --depth;
    else if (s[i] == ';' && depth == 0) found = i;
  }
  return found;
}

std::optional<IpAddress> ip_literal(std::string_view tok) {
  while (!tok.empty() && (tok.back() == '.' || tok.back() == ':')) tok.remove_suffix(1);
  if (tok.size() > 5 && iequals(tok.substr(0, 5), "ipv6:")) tok.remove_prefix(5);
  if (tok.empty()) return std::nullopt;
  const bool plausible = std::all_of(tok.begin(), tok.end(), [](char c) {
    return std::isxdigit(static_cast<unsigned char>(c)) || c == '.' || c == ':';
  });
  if (!plausible) return std::nullopt;
  return IpAddress::parse(tok);
}

constexpr std::string_view kDelims = " \t\r\n()[],;=<>\"'";

// First IP literal anywhere in the clause, comments included.
std::optional<IpAddress> first_ip(std::string_view clause) {
  std::size_t i = 0;
  while (i < clause.size()) {
    i = clause.find_first_not_of(kDelims, i);
    if (i == std::string_view::npos) break;
    auto j = clause.find_first_of(kDelims, i);
    if (j == std::string_view::npos) j = clause.size();
    if (auto ip = ip_literal(clause.substr(i, j - i))) return ip;
    i = j;
  }
  return std::nullopt;
}

std::optional<std::string> leading_host(std::string_view clause) {
  const auto words = top_level_words(clause);
  if (words.empty()) return std::nullopt;
  auto w = clause.substr(words.front().begin, words.front().end - words.front().begin);
  while (!w.empty() && (w.back() == ';' || w.back() == ',')) w.remove_suffix(1);
  if (w.empty() || ip_literal(w)) return std::nullopt;
  return std::string(w);
}

struct Clause {
  std::string_view text;
  bool present = false;
};

Clause find_clause(std::string_view trace, const std::vector<Word>& words, std::string_view key) {
  for (std::size_t k = 0; k < words.size(); ++k) {
    const auto w = trace.substr(words[k].begin, words[k].end - words[k].begin);
    if (!iequals(w, key)) continue;
    std::size_t stop = trace.size();
    for (std::size_t m = k + 1; m < words.size(); ++m) {
      const auto next = trace.substr(words[m].begin, words[m].end - words[m].begin);
      if (is_keyword(next)) {
        stop = words[m].begin;
        break;
      }
    }
    return {trace.substr(words[k].end, stop - words[k].end), true};
  }
  return {};
}

}  // namespace

RelayHop parse_received(std::string_view value) {
  RelayHop hop;
  hop.raw = std::string(value);

  std::string_view trace = value;
  if (const auto semi = last_top_level_semicolon(value); semi != std::string_view::npos) {
    trace = value.substr(0, semi);
    hop.hop_timestamp = parse_rfc5322_date(value.substr(semi + 1));
  }

  const auto words = top_level_words(trace);
  if (const auto from = find_clause(trace, words, "from"); from.present) {
    hop.from_ip = first_ip(from.text);
    hop.from_host = leading_host(from.text);
  }
  if (const auto by = find_clause(trace, words, "by"); by.present) {
    hop.by_ip = first_ip(by.text);
    hop.by_host = leading_host(by.text);
  }
  return hop;
}

bool is_received_header(const Header& h) noexcept { return iequals(h.name, "received"); }

RelayPath build_path(const EmailRecord& record) {
  RelayPath path;
  for (auto it = record.raw_headers.rbegin(); it != record.raw_headers.rend(); ++it) {
    if (is_received_header(*it)) path.hops.push_back(parse_received(it->value));
  }
  path.length = path.hops.size();
  for (std::size_t i = 0; i < path.hops.size(); ++i) {
    const auto& ip = path.hops[i].from_ip;
    if (ip && is_public_routable(*ip)) {
      path.origin_ip = ip;
      path.origin_index = i;
      break;
    }
  }
  return path;
}

std::size_t path_length(const EmailRecord& record) {
  return static_cast<std::size_t>(
      std::count_if(record.raw_headers.begin(), record.raw_headers.end(), is_received_header));
}

std::vector<IpAddress> public_ip_sequence(const RelayPath& path) {
  std::vector<IpAddress> out;
  for (const auto& hop : path.hops) {
    if (hop.from_ip && is_public_routable(*hop.from_ip)) out.push_back(*hop.from_ip);
  }
  return out;
}

}  // namespace relaytrace
