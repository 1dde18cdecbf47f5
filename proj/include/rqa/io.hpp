#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rqa {

/// Raised for unreadable or unwritable files and malformed flat-file records.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it over the target, so a
/// reader never observes a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Splits text into lines, dropping a trailing '\r' from each.
std::vector<std::string> split_lines(std::string_view text);

/// Parses one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> parse_csv_line(std::string_view line);

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view value);

std::string csv_row(const std::vector<std::string>& fields);

/// Fixed-precision decimal rendering used for every numeric table cell.
std::string format_number(double value, int precision = 6);

}  // namespace rqa
