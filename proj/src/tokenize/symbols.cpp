#include "btf/tokenize/symbols.hpp"

#include <array>

#include "btf/preprocess/normalize.hpp"

namespace btf::tokenize {

namespace {

constexpr std::array kTags = {preprocess::kDigitsTag, preprocess::kDateTag,
                              preprocess::kEmptyTag};

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

}  // namespace

bool is_protected_tag(std::string_view s) {
  for (auto tag : kTags) {
    if (s == tag) return true;
  }
  return false;
}

std::vector<std::size_t> symbol_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  std::size_t i = 0;
  while (i < text.size()) {
    offsets.push_back(i);
    if (text[i] == '<') {
      bool tag = false;
      for (auto t : kTags) {
        if (text.substr(i, t.size()) == t) {
          i += t.size();
          tag = true;
          break;
        }
      }
      if (tag) continue;
    }
    i = std::min(text.size(), i + utf8_length(static_cast<unsigned char>(text[i])));
  }
  offsets.push_back(text.size());
  return offsets;
}

std::vector<std::string> split_symbols(std::string_view text) {
  const auto off = symbol_offsets(text);
  std::vector<std::string> out;
  out.reserve(off.size() - 1);
  for (std::size_t k = 0; k + 1 < off.size(); ++k) {
    out.emplace_back(text.substr(off[k], off[k + 1] - off[k]));
  }
  return out;
}

std::string encode_wording(std::string_view normalized_wording) {
  std::string out(kEventSeparator);
  for (char c : normalized_wording) {
    if (c != ' ') out.push_back(c);
  }
  return out;
}

}  // namespace btf::tokenize
