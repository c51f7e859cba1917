#include "btf/preprocess/normalize.hpp"

#include <cstdint>

namespace btf::preprocess {

namespace {

constexpr char32_t kInvalid = 0xFFFD;

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      out.push_back(kInvalid);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kInvalid);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(kInvalid);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

// Base letter of the canonical decomposition for Latin-1 Supplement and
// Latin Extended-A, 0 when the code point has no such decomposition
// (Æ, Ø, ß, Œ, Ł, ...). Case is folded at the same time.
char fold_latin(char32_t cp) {
  if (cp >= 0xC0 && cp <= 0xFF) {
    static constexpr char kLatin1[64 + 1] =
        "aaaaaa\0ceeeeiiii\0nooooo\0\0uuuuy\0\0aaaaaa\0ceeeeiiii\0nooooo\0\0uuuuy\0y";
    const char c = kLatin1[cp - 0xC0];
    return c;
  }
  if (cp >= 0x100 && cp <= 0x17F) {
    struct Range {
      char32_t lo, hi;
      char base;
    };
    static constexpr Range kExtA[] = {
        {0x100, 0x105, 'a'}, {0x106, 0x10D, 'c'}, {0x10E, 0x10F, 'd'}, {0x112, 0x11B, 'e'},
        {0x11C, 0x123, 'g'}, {0x124, 0x125, 'h'}, {0x128, 0x130, 'i'}, {0x134, 0x135, 'j'},
        {0x136, 0x137, 'k'}, {0x139, 0x13E, 'l'}, {0x143, 0x148, 'n'}, {0x14C, 0x151, 'o'},
        {0x154, 0x159, 'r'}, {0x15A, 0x161, 's'}, {0x162, 0x165, 't'}, {0x168, 0x173, 'u'},
        {0x174, 0x175, 'w'}, {0x176, 0x178, 'y'}, {0x179, 0x17E, 'z'},
    };
    for (const auto& r : kExtA) {
      if (cp >= r.lo && cp <= r.hi) return r.base;
    }
  }
  return 0;
}

bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

enum class Kind { text, digits, date };

struct Piece {
  Kind kind;
  std::u32string text;
};

bool starts_with(const std::u32string& s, std::size_t at, std::string_view lit) {
  if (at + lit.size() > s.size()) return false;
  for (std::size_t k = 0; k < lit.size(); ++k) {
    if (s[at + k] != static_cast<char32_t>(lit[k])) return false;
  }
  return true;
}

std::size_t digit_run_end(const std::u32string& s, std::size_t from) {
  while (from < s.size() && is_ascii_digit(s[from])) ++from;
  return from;
}

// End of a date pattern starting at maximal digit run [i, a_end), or npos.
std::size_t match_date(const std::u32string& s, std::size_t i, std::size_t a_end) {
  const auto short_run = [](std::size_t b, std::size_t e) { return e - b >= 1 && e - b <= 2; };
  if (!short_run(i, a_end) || a_end >= s.size() || s[a_end] != U'/') return std::u32string::npos;
  const std::size_t b_end = digit_run_end(s, a_end + 1);
  if (!short_run(a_end + 1, b_end)) return std::u32string::npos;
  if (b_end < s.size() && s[b_end] == U'/') {
    const std::size_t c_end = digit_run_end(s, b_end + 1);
    if (short_run(b_end + 1, c_end)) return c_end;
  }
  return b_end;
}

std::vector<Piece> split_patterns(const std::u32string& s) {
  std::vector<Piece> pieces;
  std::u32string text;
  auto flush = [&] {
    if (!text.empty()) pieces.push_back({Kind::text, std::move(text)});
    text.clear();
  };
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == U'<') {
      if (starts_with(s, i, kDigitsTag)) {
        flush();
        pieces.push_back({Kind::digits, {}});
        i += kDigitsTag.size();
        continue;
      }
      if (starts_with(s, i, kDateTag)) {
        flush();
        pieces.push_back({Kind::date, {}});
        i += kDateTag.size();
        continue;
      }
      if (starts_with(s, i, kEmptyTag)) {
        // Carries no information: re-derived at the end if nothing survives.
        text.push_back(U' ');
        i += kEmptyTag.size();
        continue;
      }
    }
    if (is_ascii_digit(s[i])) {
      const std::size_t run_end = digit_run_end(s, i);
      const std::size_t date_end = match_date(s, i, run_end);
      flush();
      if (date_end != std::u32string::npos) {
        pieces.push_back({Kind::date, {}});
        i = date_end;
      } else {
        pieces.push_back({Kind::digits, {}});
        i = run_end;
      }
      continue;
    }
    text.push_back(s[i++]);
  }
  flush();
  return pieces;
}

std::string clean_text(const std::u32string& text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    if (cp >= U'A' && cp <= U'Z') {
      out.push_back(static_cast<char>(cp - U'A' + 'a'));
    } else if (cp >= U'a' && cp <= U'z') {
      out.push_back(static_cast<char>(cp));
    } else if (cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
               cp == U'\v') {
      out.push_back(' ');
    } else if (char base = fold_latin(cp)) {
      out.push_back(base);
    }
    // everything else (punctuation, combining marks, other scripts) is removed
  }
  return out;
}

}  // namespace

std::string normalize_wording(std::string_view raw) {
  const auto pieces = split_patterns(decode_utf8(raw));
  std::string joined;
  for (const auto& p : pieces) {
    switch (p.kind) {
      case Kind::text:
        joined += clean_text(p.text);
        break;
      case Kind::digits:
        joined += kDigitsTag;
        break;
      case Kind::date:
        joined += kDateTag;
        break;
    }
  }
  std::string out;
  out.reserve(joined.size());
  for (char c : joined) {
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    out.push_back(c);
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  if (out.empty()) out = kEmptyTag;
  return out;
}

corpus::AccountFlow normalize_flow(const corpus::AccountFlow& flow) {
  corpus::AccountFlow out = flow;
  for (auto& month : out.months) {
    for (auto& t : month.transactions) t.wording = normalize_wording(t.wording);
  }
  return out;
}

std::vector<corpus::AccountFlow> normalize_corpus(std::span<const corpus::AccountFlow> flows) {
  std::vector<corpus::AccountFlow> out;
  out.reserve(flows.size());
  for (const auto& f : flows) out.push_back(normalize_flow(f));
  return out;
}

bool is_normalized(std::string_view w) {
  if (w.empty() || w.front() == ' ' || w.back() == ' ') return false;
  if (w == kEmptyTag) return true;
  std::size_t i = 0;
  char prev = 0;
  while (i < w.size()) {
    if (w[i] == '<') {
      if (w.substr(i, kDigitsTag.size()) == kDigitsTag) {
        i += kDigitsTag.size();
      } else if (w.substr(i, kDateTag.size()) == kDateTag) {
        i += kDateTag.size();
      } else {
        return false;
      }
      prev = '>';
      continue;
    }
    const char c = w[i];
    if (c == ' ') {
      if (prev == ' ') return false;
    } else if (c < 'a' || c > 'z') {
      return false;
    }
    prev = c;
    ++i;
  }
  return true;
}

}  // namespace btf::preprocess
