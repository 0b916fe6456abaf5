#pragma once

// Minimal CSV reading/writing shared by the dataset and matrix serializers.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace auxcov::csv {

struct Row {
  int line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

/// Splits one line on commas. Double-quoted fields may contain commas; `""`
/// inside quotes is a literal quote. Surrounding whitespace is trimmed.
std::vector<std::string> split_line(std::string_view line);

/// Reads all non-blank lines. Throws ParseError on an unterminated quote and
/// IoError if the file cannot be opened.
std::vector<Row> read_file(const std::filesystem::path& path);

/// Parses a finite double; the whole field must be consumed.
std::optional<double> parse_double(std::string_view field);

/// Lossless 17-significant-digit rendering.
std::string format_double(double value);

std::string quote_if_needed(std::string_view field);

}  // namespace auxcov::csv
