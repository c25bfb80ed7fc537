#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace relaytrace {

using Timestamp = std::chrono::sys_seconds;
using Day = std::chrono::sys_days;

// Strict "YYYY-MM-DDTHH:MM:SSZ".
std::optional<Timestamp> parse_iso8601_utc(std::string_view text);
std::string format_iso8601_utc(Timestamp t);

// "YYYY-MM-DD".
std::optional<Day> parse_date(std::string_view text);
std::string format_date(Day d);

// RFC 5322 date as found after the ';' of a trace field, e.g.
// "Tue, 5 Jan 2021 10:00:00 +0000 (UTC)". Normalized to UTC.
std::optional<Timestamp> parse_rfc5322_date(std::string_view text);
std::string format_rfc5322_date(Timestamp t);

inline Day utc_day(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }

// Calendar-month period label, "YYYY-MM".
std::string month_label(Timestamp t);

// "15 days 11:59:34"
std::string format_lifespan(std::chrono::seconds span);

}  // namespace relaytrace
