#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace relner {

// Half-open character range [start, end) counted in Unicode scalar values,
// never bytes, so spans stay stable across encodings.
struct Span {
  size_t start = 0;
  size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

// Strict decode; throws DataFormatError on malformed UTF-8.
std::u32string decode_utf8(std::string_view text);

// Lossy decode; malformed sequences become U+FFFD.
std::u32string decode_utf8_lossy(std::string_view text);

std::string encode_utf8(std::u32string_view text);

// Number of Unicode scalar values in a UTF-8 string (lossy on bad input).
size_t cp_length(std::string_view text);

// Slice by character offsets, end exclusive.
std::string cp_substr(std::string_view text, size_t start, size_t end);

// Leftmost exact occurrence of needle in haystack as a character span.
std::optional<Span> find_cp(std::string_view haystack, std::string_view needle);

// Unicode canonical composition (NFC) only; no whitespace handling.
std::string nfc(std::string_view text);

// NFC, trim leading/trailing whitespace, collapse internal whitespace runs
// to a single U+0020. Idempotent; empty in gives empty out.
std::string normalize_text(std::string_view raw);

bool is_space_cp(char32_t cp);

}  // namespace relner
