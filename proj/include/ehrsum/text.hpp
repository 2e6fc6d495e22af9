#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ehrsum::text {

// Strips ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

bool is_blank(std::string_view s);

// ASCII-only lowercase; bytes >= 0x80 pass through untouched.
std::string to_lower_ascii(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

// Case-insensitive (ASCII) substring search. Returns the byte offset.
std::optional<std::size_t> ifind(std::string_view haystack, std::string_view needle);

// Splits on runs of ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

// Offsets exchanged with SQuAD tooling count Unicode code points, not bytes.
// Invalid UTF-8 is tolerated: every byte that is not a continuation byte
// (10xxxxxx) starts a new code point.
std::size_t codepoint_length(std::string_view s);

// Code-point index of the given byte offset (which must not split a sequence).
std::size_t byte_to_codepoint(std::string_view s, std::size_t byte_offset);

// Byte offset of the given code-point index, or nullopt if past the end.
std::optional<std::size_t> codepoint_to_byte(std::string_view s, std::size_t cp_index);

}  // namespace ehrsum::text
