#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gbox {

std::string escape_field(std::string_view text);
std::string unescape_field(std::string_view text);

/// Splits on '\t' keeping empty fields.
std::vector<std::string_view> split_tabs(std::string_view line);
std::vector<std::string_view> split_char(std::string_view text, char sep);

double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);
std::uint32_t crc32(std::string_view bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

// Portable sampling helpers over mt19937_64; the standard distributions are
// implementation-defined, which would break cross-toolchain reproducibility.
using Rng = std::mt19937_64;

std::size_t uniform_index(Rng& rng, std::size_t n);
double uniform_unit(Rng& rng);  // [0, 1)
double standard_normal(Rng& rng);

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace gbox
