#include "relaytrace/ingest.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"
#include "relaytrace/errors.hpp"

namespace relaytrace {

using json = nlohmann::json;

std::string_view to_string(Label l) noexcept {
  return l == Label::Phishing ? "phishing" : "clean";
}

std::string_view to_string(AuthState s) noexcept {
  switch (s) {
    case AuthState::Pass:
      return "pass";
    case AuthState::Fail:
      return "fail";
    case AuthState::None:
      break;
  }
  return "none";
}

bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<Label> parse_label(std::string_view s) noexcept {
  if (iequals(s, "phishing")) return Label::Phishing;
  if (iequals(s, "clean")) return Label::Clean;
  return std::nullopt;
}

std::optional<AuthState> parse_auth_state(std::string_view s) noexcept {
  if (iequals(s, "pass")) return AuthState::Pass;
  if (iequals(s, "fail")) return AuthState::Fail;
  if (iequals(s, "none") || s.empty()) return AuthState::None;
  return std::nullopt;
}

namespace {

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw MalformedRecord(std::string("missing ") + key);
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_string()) throw MalformedRecord(std::string(key) + " is not a string");
  return v.get<std::string>();
}

std::string optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw MalformedRecord(std::string(key) + " is not a string");
  return it->get<std::string>();
}

AuthState auth_field(const json& auth, const char* key) {
  auto it = auth.find(key);
  if (it == auth.end() || it->is_null()) return AuthState::None;
  if (!it->is_string()) throw MalformedRecord(std::string("auth.") + key + " is not a string");
  auto s = parse_auth_state(it->get<std::string>());
  if (!s) throw MalformedRecord(std::string("auth.") + key + " has unknown value");
  return *s;
}

std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

EmailRecord parse_record(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw MalformedRecord(std::string("not a structured object: ") + e.what());
  }
  if (!obj.is_object()) throw MalformedRecord("not an object");

  EmailRecord r;
  r.message_id = require_string(obj, "message_id");
  if (r.message_id.empty()) throw MalformedRecord("empty message_id");

  const auto when = require_string(obj, "delivered_at");
  auto ts = parse_iso8601_utc(when);
  if (!ts) throw MalformedRecord("delivered_at is not YYYY-MM-DDTHH:MM:SSZ");
  r.delivered_at = *ts;

  auto label = parse_label(require_string(obj, "label"));
  if (!label) throw MalformedRecord("label must be phishing or clean");
  r.label = *label;

  if (auto it = obj.find("headers"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) throw MalformedRecord("headers is not a list");
    r.raw_headers.reserve(it->size());
    for (const auto& pair : *it) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
        throw MalformedRecord("header entry is not a [name, value] pair");
      }
      r.raw_headers.push_back({pair[0].get<std::string>(), pair[1].get<std::string>()});
    }
  } else if (auto blk = obj.find("header_block"); blk != obj.end() && blk->is_string()) {
    try {
      r.raw_headers = parse_raw_header_block(blk->get<std::string>());
    } catch (const MalformedHeader& e) {
      throw MalformedRecord(e.what());
    }
  } else {
    throw MalformedRecord("missing headers");
  }

  r.recipient_domain = lowercase(require_string(obj, "recipient_domain"));
  if (r.recipient_domain.empty()) throw MalformedRecord("empty recipient_domain");

  r.from_email = optional_string(obj, "from_email");
  r.mail_from = optional_string(obj, "mail_from");
  r.subject = optional_string(obj, "subject");
  r.org_id = optional_string(obj, "org_id");

  if (auto it = obj.find("auth"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) throw MalformedRecord("auth is not an object");
    r.auth.spf = auth_field(*it, "spf");
    r.auth.dkim = auth_field(*it, "dkim");
    r.auth.dmarc = auth_field(*it, "dmarc");
  }
  return r;
}

std::string serialize_record(const EmailRecord& r) {
  json headers = json::array();
  for (const auto& h : r.raw_headers) headers.push_back(json::array({h.name, h.value}));
  json obj = {
      {"message_id", r.message_id},
      {"delivered_at", format_iso8601_utc(r.delivered_at)},
      {"headers", std::move(headers)},
      {"from_email", r.from_email},
      {"mail_from", r.mail_from},
      {"subject", r.subject},
      {"recipient_domain", r.recipient_domain},
      {"org_id", r.org_id},
      {"label", to_string(r.label)},
      {"auth",
       {{"spf", to_string(r.auth.spf)},
        {"dkim", to_string(r.auth.dkim)},
        {"dmarc", to_string(r.auth.dmarc)}}},
  };
  return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<Header> parse_raw_header_block(std::string_view text) {
  std::vector<Header> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) break;

    if (line.front() == ' ' || line.front() == '\t') {
      if (out.empty()) throw MalformedHeader(line_no);
      auto first = line.find_first_not_of(" \t");
      if (first == std::string_view::npos) continue;
      auto& value = out.back().value;
      if (!value.empty()) value.push_back(' ');
      value.append(line.substr(first));
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) throw MalformedHeader(line_no);
    Header h;
    h.name = std::string(line.substr(0, colon));
    auto value = line.substr(colon + 1);
    const auto first = value.find_first_not_of(" \t");
    h.value = first == std::string_view::npos ? std::string() : std::string(value.substr(first));
    out.push_back(std::move(h));
  }
  return out;
}

CorpusReader::CorpusReader(const std::filesystem::path& path) : in_(path) {
  if (!in_) throw IoError("cannot open corpus " + path.string());
}

std::optional<EmailRecord> CorpusReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(),
                    [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
      continue;
    }
    try {
      return parse_record(line);
    } catch (const MalformedRecord& e) {
      ++skipped_;
      skipped_lines_.emplace_back(line_no_, e.reason());
    }
  }
  if (in_.bad()) throw IoError("read error after line " + std::to_string(line_no_));
  return std::nullopt;
}

std::size_t stream_corpus(const std::filesystem::path& path,
                          const std::function<void(EmailRecord&&)>& sink) {
  CorpusReader reader(path);
  while (auto rec = reader.next()) sink(std::move(*rec));
  return reader.skip_count();
}

CorpusLoad read_corpus(const std::filesystem::path& path) {
  CorpusLoad out;
  out.skip_count = stream_corpus(path, [&](EmailRecord&& r) { out.records.push_back(std::move(r)); });
  return out;
}

}  // namespace relaytrace
