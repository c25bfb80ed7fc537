#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relaytrace/time.hpp"

namespace relaytrace {

enum class Label : std::uint8_t { Phishing, Clean };
enum class AuthState : std::uint8_t { Pass, Fail, None };

struct AuthResults {
  AuthState spf = AuthState::None;
  AuthState dkim = AuthState::None;
  AuthState dmarc = AuthState::None;

  friend bool operator==(const AuthResults&, const AuthResults&) = default;
};

struct Header {
  std::string name;
  std::string value;

  friend bool operator==(const Header&, const Header&) = default;
};

// Metadata for one labeled message. Headers are kept in message order,
// which for trace fields means newest first.
struct EmailRecord {
  std::string message_id;
  Timestamp delivered_at{};
  std::vector<Header> raw_headers;
  std::string from_email;
  std::string mail_from;
  std::string subject;
  std::string recipient_domain;
  std::string org_id;
  Label label = Label::Clean;
  AuthResults auth;

  friend bool operator==(const EmailRecord&, const EmailRecord&) = default;
};

std::string_view to_string(Label l) noexcept;
std::string_view to_string(AuthState s) noexcept;
std::optional<Label> parse_label(std::string_view s) noexcept;
std::optional<AuthState> parse_auth_state(std::string_view s) noexcept;

bool iequals(std::string_view a, std::string_view b) noexcept;

// Parses one corpus line. Throws MalformedRecord when a required field
// (message_id, delivered_at, label, headers, recipient_domain) is missing or
// has the wrong type. A "header_block" string is accepted in place of
// "headers".
EmailRecord parse_record(std::string_view line);

// Single-line encoding accepted by parse_record.
std::string serialize_record(const EmailRecord& record);

// Splits an RFC 5322 header block into (name, value) pairs, unfolding
// continuation lines with a single space. Parsing stops at the first empty
// line. Throws MalformedHeader with a 1-based line number.
std::vector<Header> parse_raw_header_block(std::string_view text);

// Sequential reader over a line-oriented corpus file. Malformed lines are
// skipped and counted; blank lines are ignored.
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path);

  std::optional<EmailRecord> next();

  std::size_t skip_count() const noexcept { return skipped_; }
  std::size_t line_count() const noexcept { return line_no_; }
  // Line numbers (1-based) and reasons of skipped lines.
  const std::vector<std::pair<std::size_t, std::string>>& skipped() const noexcept {
    return skipped_lines_;
  }

 private:
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::size_t skipped_ = 0;
  std::vector<std::pair<std::size_t, std::string>> skipped_lines_;
};

struct CorpusLoad {
  std::vector<EmailRecord> records;
  std::size_t skip_count = 0;
};

// Streams every valid record to `sink` in file order; returns the skip count.
std::size_t stream_corpus(const std::filesystem::path& path,
                          const std::function<void(EmailRecord&&)>& sink);

CorpusLoad read_corpus(const std::filesystem::path& path);

}  // namespace relaytrace
