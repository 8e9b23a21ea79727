#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gvckit::io {

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string trim(std::string_view text);

// Strict decimal parse of the whole cell; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view cell);
std::optional<long> parse_int(std::string_view cell);

// Shortest text with 17 significant digits; round-trips every finite double.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Reads lines, tolerating CRLF and a UTF-8 byte-order mark on the first line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace gvckit::io
