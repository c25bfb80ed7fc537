#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace relaytrace::csv {

// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

// Calls `row` for each non-blank line with its fields and 1-based line number.
// Throws IoError if the file cannot be opened.
void for_each_row(const std::filesystem::path& path,
                  const std::function<void(const std::vector<std::string>&, std::size_t)>& row);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace relaytrace::csv
