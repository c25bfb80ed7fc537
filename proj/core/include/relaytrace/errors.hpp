#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relaytrace {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MalformedRecord : public Error {
 public:
  explicit MalformedRecord(const std::string& reason)
      : Error("malformed record: " + reason), reason_(reason) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

class MalformedHeader : public Error {
 public:
  explicit MalformedHeader(std::size_t line_no)
      : Error("malformed header at line " + std::to_string(line_no)),
        line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DuplicatePrefix : public Error {
 public:
  explicit DuplicatePrefix(const std::string& prefix)
      : Error("duplicate prefix: " + prefix), prefix_(prefix) {}
  const std::string& prefix() const noexcept { return prefix_; }

 private:
  std::string prefix_;
};

class MissingMxSnapshot : public Error {
 public:
  MissingMxSnapshot(const std::string& domain, const std::string& date)
      : Error("no MX snapshot for " + domain + " on or before " + date) {}
};

class EmptyEntity : public Error {
 public:
  EmptyEntity() : Error("entity has no emails") {}
  explicit EmptyEntity(const std::string& what) : Error(what) {}
};

class NoPhishing : public Error {
 public:
  NoPhishing() : Error("entity has no phishing emails") {}
};

class UnknownOrg : public Error {
 public:
  explicit UnknownOrg(const std::string& org)
      : Error("no pre-filter classification for org " + org), org_(org) {}
  const std::string& org() const noexcept { return org_; }

 private:
  std::string org_;
};

class VersionMismatch : public Error {
 public:
  VersionMismatch(int found, int supported)
      : Error("state file format version " + std::to_string(found) +
              " is not supported (expected " + std::to_string(supported) + ")"),
        found_(found) {}
  int found() const noexcept { return found_; }

 private:
  int found_;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

// Configuration validation failure; names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error(field + ": " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace relaytrace
