#include "relaytrace/time.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <vector>

namespace relaytrace {

namespace {

using namespace std::chrono;

bool read_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::optional<Day> make_day(int y, int m, int d) {
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                           std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

constexpr std::array<std::string_view, 12> kMonths = {
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"};
constexpr std::array<std::string_view, 7> kWeekdays = {"Sun", "Mon", "Tue", "Wed",
                                                       "Thu", "Fri", "Sat"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == ',')) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != ',') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<int> zone_offset_minutes(std::string_view z) {
  if (z.size() == 5 && (z[0] == '+' || z[0] == '-')) {
    int hh = 0, mm = 0;
    if (!read_int(z.substr(1, 2), hh) || !read_int(z.substr(3, 2), mm)) return std::nullopt;
    if (mm >= 60) return std::nullopt;
    const int off = hh * 60 + mm;
    return z[0] == '-' ? -off : off;
  }
  const auto name = lower(z);
  if (name == "ut" || name == "utc" || name == "gmt" || name == "z") return 0;
  if (name == "est") return -5 * 60;
  if (name == "edt") return -4 * 60;
  if (name == "cst") return -6 * 60;
  if (name == "cdt") return -5 * 60;
  if (name == "mst") return -7 * 60;
  if (name == "mdt") return -6 * 60;
  if (name == "pst") return -8 * 60;
  if (name == "pdt") return -7 * 60;
  return std::nullopt;
}

}  // namespace

std::optional<Timestamp> parse_iso8601_utc(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SSZ
  if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
      s[16] != ':' || s[19] != 'Z') {
    return std::nullopt;
  }
  int y, mo, d, h, mi, se;
  if (!read_int(s.substr(0, 4), y) || !read_int(s.substr(5, 2), mo) ||
      !read_int(s.substr(8, 2), d) || !read_int(s.substr(11, 2), h) ||
      !read_int(s.substr(14, 2), mi) || !read_int(s.substr(17, 2), se)) {
    return std::nullopt;
  }
  if (h > 23 || mi > 59 || se > 59) return std::nullopt;
  auto day = make_day(y, mo, d);
  if (!day) return std::nullopt;
  return Timestamp{*day} + hours{h} + minutes{mi} + seconds{se};
}

std::string format_iso8601_utc(Timestamp t) {
  const auto day = utc_day(t);
  const year_month_day ymd{day};
  const hh_mm_ss tod{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(tod.hours().count()),
                int(tod.minutes().count()), int(tod.seconds().count()));
  return buf;
}

std::optional<Day> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y, mo, d;
  if (!read_int(s.substr(0, 4), y) || !read_int(s.substr(5, 2), mo) ||
      !read_int(s.substr(8, 2), d)) {
    return std::nullopt;
  }
  return make_day(y, mo, d);
}

std::string format_date(Day d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

std::optional<Timestamp> parse_rfc5322_date(std::string_view text) {
  // Drop trailing comments such as "(UTC)" or "(PST)".
  std::string cleaned;
  int depth = 0;
  for (char c : text) {
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (depth > 0) --depth;
    } else if (depth == 0) {
      cleaned.push_back(c);
    }
  }
  auto tok = split_ws(cleaned);
  std::size_t i = 0;
  if (i < tok.size() && !tok[i].empty() && std::isalpha(static_cast<unsigned char>(tok[i][0]))) {
    ++i;  // day of week
  }
  if (tok.size() < i + 4) return std::nullopt;
  int d = 0, y = 0;
  if (!read_int(tok[i], d)) return std::nullopt;
  const auto mon = lower(tok[i + 1]);
  int mo = 0;
  for (std::size_t k = 0; k < kMonths.size(); ++k) {
    if (mon.substr(0, 3) == kMonths[k]) mo = static_cast<int>(k) + 1;
  }
  if (mo == 0 || !read_int(tok[i + 2], y)) return std::nullopt;
  if (tok[i + 2].size() == 2) y += y < 50 ? 2000 : 1900;

  // HH:MM[:SS]
  const auto hms = tok[i + 3];
  int h = 0, mi = 0, se = 0;
  const auto c1 = hms.find(':');
  if (c1 == std::string_view::npos) return std::nullopt;
  const auto c2 = hms.find(':', c1 + 1);
  if (!read_int(hms.substr(0, c1), h)) return std::nullopt;
  if (c2 == std::string_view::npos) {
    if (!read_int(hms.substr(c1 + 1), mi)) return std::nullopt;
  } else if (!read_int(hms.substr(c1 + 1, c2 - c1 - 1), mi) ||
             !read_int(hms.substr(c2 + 1), se)) {
    return std::nullopt;
  }
  if (h > 23 || mi > 59 || se > 60) return std::nullopt;
  if (se == 60) se = 59;

  int offset = 0;
  if (tok.size() > i + 4) {
    auto z = zone_offset_minutes(tok[i + 4]);
    if (!z) return std::nullopt;
    offset = *z;
  }
  auto day = make_day(y, mo, d);
  if (!day) return std::nullopt;
  return Timestamp{*day} + hours{h} + minutes{mi} + seconds{se} - minutes{offset};
}

std::string format_rfc5322_date(Timestamp t) {
  const auto day = utc_day(t);
  const year_month_day ymd{day};
  const weekday wd{day};
  const hh_mm_ss tod{t - day};
  static constexpr std::array<const char*, 12> kMon = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                       "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s, %u %s %04d %02d:%02d:%02d +0000",
                kWeekdays[wd.c_encoding()].data(), unsigned(ymd.day()),
                kMon[unsigned(ymd.month()) - 1], int(ymd.year()), int(tod.hours().count()),
                int(tod.minutes().count()), int(tod.seconds().count()));
  return buf;
}

std::string month_label(Timestamp t) {
  const year_month_day ymd{utc_day(t)};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", int(ymd.year()), unsigned(ymd.month()));
  return buf;
}

std::string format_lifespan(std::chrono::seconds span) {
  const auto total = span.count();
  const long long days_part = total / 86400;
  const long long rem = total % 86400;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%lld days %02lld:%02lld:%02lld", days_part, rem / 3600,
                (rem % 3600) / 60, rem % 60);
  return buf;
}

}  // namespace relaytrace
