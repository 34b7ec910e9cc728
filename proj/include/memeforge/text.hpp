// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace memeforge::text {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::string to_upper_ascii(std::string_view s);

/// Replaces every run of ASCII whitespace with a single space and trims.
std::string collapse_whitespace(std::string_view s);

/// Splits on single spaces, dropping empty pieces.
std::vector<std::string> split_words(std::string_view s);

/// Decodes UTF-8 leniently: malformed bytes decode to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view s);

/// Number of code points under lenient decoding.
std::size_t utf8_length(std::string_view s);

/// Longest prefix of `s` holding at most `max_code_points` code points,
/// cut on a code point boundary.
std::string_view utf8_prefix(std::string_view s, std::size_t max_code_points);

bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Case-insensitive (ASCII) search; returns npos when absent.
std::size_t find_icase(std::string_view haystack, std::string_view needle,
                       std::size_t from = 0);

}  // namespace memeforge::text
