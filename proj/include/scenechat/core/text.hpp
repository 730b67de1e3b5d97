// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace scenechat {

/// Fixed two-decimal rendering; ties resolve to even on the exact binary
/// value and negative zero prints as "0.00".
std::string format_fixed2(double value);

/// Number of whitespace-delimited tokens.
std::size_t word_count(std::string_view text);

/// Lowercased alphanumeric words (apostrophes kept inside words).
std::vector<std::string> lower_words(std::string_view text);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
bool contains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split_lines(std::string_view text);

/// 64-bit FNV-1a, used for parameter and corpus fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace scenechat
