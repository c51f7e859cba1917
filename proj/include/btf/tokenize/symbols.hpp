#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace btf::tokenize {

// Extra-wording separator, U+2581. The intra-wording separator is the empty
// string: words of one wording are concatenated.
inline constexpr std::string_view kEventSeparator = "\xE2\x96\x81";

// Splits text into atomic symbols: protected tags (<digits>, <date>, <empty>)
// as single symbols, otherwise one UTF-8 code point per symbol. Returns byte
// offsets of symbol starts plus a final offset equal to text.size().
std::vector<std::size_t> symbol_offsets(std::string_view text);

std::vector<std::string> split_symbols(std::string_view text);

// "chq <digits>" -> "▁chq<digits>"
std::string encode_wording(std::string_view normalized_wording);

bool is_protected_tag(std::string_view s);

}  // namespace btf::tokenize
