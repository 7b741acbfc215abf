#pragma once

#include <string>
#include <string_view>

namespace nli {

/// Decodes UTF-8 into code points. Rejects overlong forms, surrogates and
/// truncated sequences with a DecodeError carrying the byte offset.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view text);

/// Unicode White_Space property.
bool is_unicode_space(char32_t c) noexcept;

/// Collapses every maximal whitespace run to one ASCII space and trims both ends.
std::u32string normalize_whitespace(std::u32string_view text);
std::string normalize_whitespace(std::string_view utf8);

/// Lowercases ASCII and Latin-1 letters; other code points pass through.
std::u32string to_lower(std::u32string_view text);

}  // namespace nli
