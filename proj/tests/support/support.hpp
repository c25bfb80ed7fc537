#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "relaytrace/ingest.hpp"
#include "relaytrace/ip.hpp"
#include "relaytrace/time.hpp"

namespace rt_test {

inline relaytrace::IpAddress ip(std::string_view s) {
  auto v = relaytrace::IpAddress::parse(s);
  if (!v) throw std::invalid_argument("bad test ip " + std::string(s));
  return *v;
}

inline relaytrace::Timestamp ts(std::string_view s) {
  auto v = relaytrace::parse_iso8601_utc(s);
  if (!v) throw std::invalid_argument("bad test timestamp " + std::string(s));
  return *v;
}

// `received` is in header order, newest first.
inline relaytrace::EmailRecord make_record(std::string id, std::string_view at, relaytrace::Label label,
                                           std::vector<std::string> received,
                                           std::string domain = "corp.example",
                                           std::string org = "org1") {
  relaytrace::EmailRecord r;
  r.message_id = std::move(id);
  r.delivered_at = ts(at);
  r.label = label;
  r.recipient_domain = std::move(domain);
  r.org_id = std::move(org);
  for (auto& v : received) r.raw_headers.push_back({"Received", std::move(v)});
  return r;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("relaytrace-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace rt_test
