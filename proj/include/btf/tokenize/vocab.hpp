#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace btf::tokenize {

// Reserved ids of the five control tokens inside one modality dictionary.
struct ControlIds {
  int pad = 0;
  int bos = 1;
  int eos = 2;
  int sep = 3;
  int mask = 4;

  bool contains(int id) const noexcept {
    return id == pad || id == bos || id == eos || id == sep || id == mask;
  }
  bool operator==(const ControlIds&) const = default;
};

inline constexpr std::array<std::string_view, 5> kControlTokens = {"[PAD]", "[BOS]", "[EOS]",
                                                                   "[SEP]", "[MASK]"};
inline constexpr std::array<std::string_view, 3> kProtectedTags = {"<digits>", "<date>",
                                                                   "<empty>"};

// Unigram wording dictionary. Ids are dense: controls 0-4, protected tags 5-7,
// then ordinary pieces. Control tokens never take part in segmentation.
class VocabModel {
 public:
  struct Entry {
    std::string piece;
    double log_prob = 0.0;

    bool operator==(const Entry&) const = default;
  };

  VocabModel() = default;

  // `pieces` lists ordinary pieces with log-probabilities; controls and
  // protected tags are placed first. A protected tag listed in `pieces` gives
  // its log-probability to the reserved entry. Throws ConfigError on
  // duplicates, positive log-probs, or a '▁' anywhere but at a piece start.
  static VocabModel from_pieces(const std::vector<std::pair<std::string, double>>& pieces,
                                double protected_log_prob = -20.0);

  std::size_t size() const noexcept { return entries_.size(); }
  const Entry& entry(int id) const { return entries_.at(static_cast<std::size_t>(id)); }
  const std::string& piece(int id) const { return entry(id).piece; }
  double log_prob(int id) const { return entry(id).log_prob; }
  std::optional<int> find(std::string_view piece) const;
  const ControlIds& control() const noexcept { return control_; }
  int protected_id(std::string_view tag) const;
  bool is_control(int id) const noexcept { return control_.contains(id); }
  std::size_t max_piece_symbols() const noexcept { return max_symbols_; }

  // Maximum-likelihood segmentation. Ties: fewer tokens, then the
  // lexicographically smallest id sequence. Throws TokenizeError naming the
  // first symbol no single-symbol piece covers.
  std::vector<int> segment(std::string_view encoded_text) const;
  // Same as segment() but never uses piece `excluded`; nullopt if infeasible.
  std::optional<std::pair<double, std::vector<int>>> best_segmentation(
      std::string_view encoded_text, int excluded = -1) const;

  std::string to_tsv() const;
  static VocabModel from_tsv(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static VocabModel load(const std::filesystem::path& path);

  bool operator==(const VocabModel& other) const { return entries_ == other.entries_; }

 private:
  struct TrieNode {
    int id = -1;
    std::vector<std::pair<unsigned char, int>> children;
  };

  void add(std::string piece, double log_prob);
  void build_index();

  std::vector<Entry> entries_;
  ControlIds control_;
  std::vector<TrieNode> trie_;
  std::size_t max_symbols_ = 1;
};

}  // namespace btf::tokenize
