#pragma once

// Internal helpers shared by the library sources. Not installed.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dstdoctor::detail {

/// Whole file as lines, '\n'-separated, trailing '\r' stripped.
/// Throws ParseError when the file cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes content to a sibling temp file and renames it over `path`, so
/// readers never observe a partial artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split_ws(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// True for comment ('#' first non-space byte) and blank lines.
bool is_skippable_line(std::string_view line);

/// Fixed-point decimal via snprintf: locale-independent, same bytes on every
/// platform for the same double.
std::string format_fixed(double value, int digits);
/// "38.0%" style, one decimal digit.
std::string format_percent(double fraction);

/// Parses a non-negative integer; throws ParseError naming `what` on junk.
std::uint64_t parse_uint(std::string_view text, std::string_view what);
double parse_double(std::string_view text, std::string_view what);

/// Uniform draw from [0, n) by rejection sampling on the raw 64-bit stream.
/// std::uniform_int_distribution is implementation-defined; this is not.
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t n);

/// Fisher-Yates with bounded_rand; byte-for-byte reproducible everywhere.
template <typename T>
void shuffle_portable(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded_rand(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Escapes '\t' and '\n' as "\\t"/"\\n" for TSV cells; unescape reverses it.
std::string tsv_escape(std::string_view cell);
std::string tsv_unescape(std::string_view cell);

}  // namespace dstdoctor::detail
