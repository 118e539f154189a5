#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qbe::text {

std::string_view trim(std::string_view s);

/// Splits on every occurrence of `sep` (empty fields kept).
std::vector<std::string> split(std::string_view s, char sep);

/// Splits on runs of whitespace (empty fields dropped).
std::vector<std::string> split_whitespace(std::string_view s);

/// Decodes UTF-8 into code points; invalid bytes become U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

/// Simple (1:1) lowercase mapping for Latin, Greek and Cyrillic blocks.
char32_t fold_case(char32_t c);

/// True for ASCII punctuation and the common Unicode punctuation blocks.
bool is_punctuation(char32_t c);
bool is_space(char32_t c);

/// Case-folds, deletes punctuation, and splits on whitespace.
std::vector<std::string> normalize_tokens(std::string_view transcription);

}  // namespace qbe::text
