#include "btf/tokenize/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "btf/common/error.hpp"
#include "btf/common/format.hpp"
#include "btf/tokenize/symbols.hpp"

namespace btf::tokenize {

VocabModel VocabModel::from_pieces(const std::vector<std::pair<std::string, double>>& pieces,
                                   double protected_log_prob) {
  VocabModel v;
  for (auto c : kControlTokens) v.add(std::string(c), 0.0);
  for (auto t : kProtectedTags) v.add(std::string(t), protected_log_prob);
  for (const auto& [piece, lp] : pieces) {
    if (!(lp <= 0.0)) throw ConfigError("vocab: log_prob of '" + piece + "' must be <= 0");
    if (piece.empty()) throw ConfigError("vocab: empty piece");
    if (std::find(kControlTokens.begin(), kControlTokens.end(), piece) != kControlTokens.end()) {
      throw ConfigError("vocab: control token '" + piece + "' listed as a piece");
    }
    if (auto it = std::find(kProtectedTags.begin(), kProtectedTags.end(), piece);
        it != kProtectedTags.end()) {
      v.entries_[kControlTokens.size() + static_cast<std::size_t>(it - kProtectedTags.begin())]
          .log_prob = lp;
      continue;
    }
    const auto sep = piece.find(kEventSeparator, 1);
    if (sep != std::string::npos) {
      throw ConfigError("vocab: separator inside piece '" + piece + "'");
    }
    v.add(piece, lp);
  }
  v.build_index();
  // Duplicates are detected after indexing so that the message names the piece.
  std::vector<std::string> sorted;
  sorted.reserve(v.entries_.size());
  for (const auto& e : v.entries_) sorted.push_back(e.piece);
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
    throw ConfigError("vocab: duplicate piece '" + *dup + "'");
  }
  return v;
}

void VocabModel::add(std::string piece, double log_prob) {
  entries_.push_back(Entry{std::move(piece), log_prob});
}

void VocabModel::build_index() {
  trie_.assign(1, TrieNode{});
  max_symbols_ = 1;
  for (std::size_t id = 0; id < entries_.size(); ++id) {
    if (control_.contains(static_cast<int>(id))) continue;
    const auto& piece = entries_[id].piece;
    max_symbols_ = std::max(max_symbols_, symbol_offsets(piece).size() - 1);
    int node = 0;
    for (char ch : piece) {
      const auto b = static_cast<unsigned char>(ch);
      auto& kids = trie_[static_cast<std::size_t>(node)].children;
      auto it = std::find_if(kids.begin(), kids.end(), [b](const auto& kv) { return kv.first == b; });
      if (it == kids.end()) {
        trie_.push_back(TrieNode{});
        const int fresh = static_cast<int>(trie_.size()) - 1;
        trie_[static_cast<std::size_t>(node)].children.emplace_back(b, fresh);
        node = fresh;
      } else {
        node = it->second;
      }
    }
    trie_[static_cast<std::size_t>(node)].id = static_cast<int>(id);
  }
}

std::optional<int> VocabModel::find(std::string_view piece) const {
  for (std::size_t k = 0; k < kControlTokens.size(); ++k) {
    if (piece == kControlTokens[k]) return static_cast<int>(k);
  }
  if (trie_.empty()) return std::nullopt;
  int node = 0;
  for (char ch : piece) {
    const auto b = static_cast<unsigned char>(ch);
    const auto& kids = trie_[static_cast<std::size_t>(node)].children;
    auto it = std::find_if(kids.begin(), kids.end(), [b](const auto& kv) { return kv.first == b; });
    if (it == kids.end()) return std::nullopt;
    node = it->second;
  }
  const int id = trie_[static_cast<std::size_t>(node)].id;
  if (id < 0) return std::nullopt;
  return id;
}

int VocabModel::protected_id(std::string_view tag) const {
  auto id = find(tag);
  if (!id || !is_protected_tag(tag)) throw LookupError("not a protected tag: '" + std::string(tag) + "'");
  return *id;
}

std::optional<std::pair<double, std::vector<int>>> VocabModel::best_segmentation(
    std::string_view text, int excluded) const {
  const auto off = symbol_offsets(text);
  const std::size_t n = off.size() - 1;
  struct Cell {
    bool ok = false;
    double score = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    int first = -1;
    std::size_t next = 0;
  };
  // Suffix DP: cell[i] holds the best segmentation of symbols [i, n). With the
  // first piece fixed, the remaining order (score, count, ids) is decided by
  // the suffix alone, so this yields the exact lexicographic tie-break.
  std::vector<Cell> cell(n + 1);
  cell[n] = Cell{true, 0.0, 0, -1, n};
  for (std::size_t i = n; i-- > 0;) {
    Cell best;
    int node = 0;
    std::size_t sym = i;
    for (std::size_t b = off[i]; b < text.size(); ++b) {
      const auto byte = static_cast<unsigned char>(text[b]);
      const auto& kids = trie_[static_cast<std::size_t>(node)].children;
      auto it = std::find_if(kids.begin(), kids.end(),
                             [byte](const auto& kv) { return kv.first == byte; });
      if (it == kids.end()) break;
      node = it->second;
      if (b + 1 != off[sym + 1]) continue;
      ++sym;
      const int id = trie_[static_cast<std::size_t>(node)].id;
      if (id < 0 || id == excluded || !cell[sym].ok) continue;
      const double score = entries_[static_cast<std::size_t>(id)].log_prob + cell[sym].score;
      const std::size_t count = 1 + cell[sym].count;
      const bool better = !best.ok || score > best.score ||
                          (score == best.score &&
                           (count < best.count || (count == best.count && id < best.first)));
      if (better) best = Cell{true, score, count, id, sym};
    }
    cell[i] = best;
  }
  if (!cell[0].ok) return std::nullopt;
  std::vector<int> ids;
  ids.reserve(cell[0].count);
  for (std::size_t i = 0; i < n; i = cell[i].next) ids.push_back(cell[i].first);
  return std::make_pair(cell[0].score, std::move(ids));
}

std::vector<int> VocabModel::segment(std::string_view text) const {
  if (auto best = best_segmentation(text)) return std::move(best->second);
  for (const auto& sym : split_symbols(text)) {
    const auto id = find(sym);
    if (!id || is_control(*id)) {
      throw TokenizeError("cannot tokenize character '" + sym + "': no piece covers it");
    }
  }
  throw TokenizeError("cannot tokenize '" + std::string(text) + "'");
}

std::string VocabModel::to_tsv() const {
  std::ostringstream os;
  os << "#btf-vocab\tv1\tcontrol=";
  for (std::size_t k = 0; k < kControlTokens.size(); ++k) {
    os << (k ? "," : "") << kControlTokens[k] << ':' << k;
  }
  os << "\tprotected=";
  for (std::size_t k = 0; k < kProtectedTags.size(); ++k) {
    os << (k ? "," : "") << kProtectedTags[k] << ':' << kControlTokens.size() + k;
  }
  os << '\n';
  for (const auto& e : entries_) os << e.piece << '\t' << format_exact(e.log_prob) << '\n';
  return os.str();
}

VocabModel VocabModel::from_tsv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  if (lines.empty()) throw ParseError(1, "empty vocab file");
  const std::string expected_header = [] {
    std::string h = VocabModel::from_pieces({}).to_tsv();
    return h.substr(0, h.find('\n'));
  }();
  if (lines[0] != expected_header) throw ParseError(1, "bad vocab header");

  VocabModel v;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto line = lines[k];
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) throw ParseError(k + 1, "expected token<TAB>log_prob");
    double lp = 0.0;
    try {
      lp = parse_double(line.substr(tab + 1));
    } catch (const InputError& e) {
      throw ParseError(k + 1, e.what());
    }
    v.add(std::string(line.substr(0, tab)), lp);
  }
  const std::size_t reserved = kControlTokens.size() + kProtectedTags.size();
  if (v.entries_.size() < reserved) throw ParseError(lines.size(), "vocab lacks reserved tokens");
  for (std::size_t k = 0; k < kControlTokens.size(); ++k) {
    if (v.entries_[k].piece != kControlTokens[k]) throw ParseError(k + 2, "control token out of place");
  }
  for (std::size_t k = 0; k < kProtectedTags.size(); ++k) {
    if (v.entries_[kControlTokens.size() + k].piece != kProtectedTags[k]) {
      throw ParseError(kControlTokens.size() + k + 2, "protected tag out of place");
    }
  }
  std::vector<std::pair<std::string, double>> pieces;
  for (std::size_t k = kControlTokens.size(); k < v.entries_.size(); ++k) {
    pieces.emplace_back(v.entries_[k].piece, v.entries_[k].log_prob);
  }
  try {
    return from_pieces(pieces);
  } catch (const ConfigError& e) {
    throw ParseError(0, e.what());
  }
}

void VocabModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << to_tsv();
}

VocabModel VocabModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_tsv(ss.str());
}

}  // namespace btf::tokenize
