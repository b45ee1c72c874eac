#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tempora::text {

// Number of Unicode scalar values in well-formed UTF-8.
std::size_t utf8_length(std::string_view s) noexcept;

// Replaces every ill-formed UTF-8 sequence with U+FFFD.
std::string utf8_sanitize(std::string_view s);

// Longest prefix containing at most `max_chars` scalar values.
std::string_view utf8_prefix(std::string_view s, std::size_t max_chars) noexcept;

// Byte offsets of the end of each scalar value; the default mock tokenizer.
std::vector<std::size_t> utf8_boundaries(std::string_view s);

// Byte offset of the `chars`-th scalar value (clamped to s.size()).
std::size_t utf8_byte_offset(std::string_view s, std::size_t chars) noexcept;

bool is_ascii(std::string_view s) noexcept;

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);

std::string sha256_hex(std::string_view data);

} // namespace tempora::text
