#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "btf/corpus/corpus.hpp"
#include "btf/tokenize/quantizer.hpp"
#include "btf/tokenize/vocab.hpp"

namespace btf::tokenize {

struct TokenizedSequence {
  std::vector<int> x_ids, a_ids, d_ids, t_ids;
  std::vector<bool> attn_mask;                               // false on [PAD]
  std::vector<std::pair<std::size_t, std::size_t>> event_spans;  // [start, end)
  // Per event: (month index, transaction index) in the caller's input, or
  // (month, npos) for the placeholder of an empty month.
  std::vector<std::pair<std::size_t, std::size_t>> event_origin;
  std::vector<std::int64_t> event_amount_cents;
  std::vector<std::size_t> sep_positions;                    // at most one

  std::size_t size() const noexcept { return x_ids.size(); }
  std::size_t true_length() const noexcept;                  // positions with attn_mask set
  bool operator==(const TokenizedSequence&) const = default;
};

enum class NspRole { mono, bi };

// Stable order by (day, amount); returns indices into `month`.
std::vector<std::size_t> order_permutation(std::span<const corpus::RawTransaction> month);
std::vector<corpus::RawTransaction> order_events(std::span<const corpus::RawTransaction> month);

// Vocabulary plus both quantizers, i.e. everything needed to assemble streams.
class Tokenizer {
 public:
  Tokenizer(VocabModel vocab, AmountQuantizer amounts, DateQuantizer dates = DateQuantizer());

  const VocabModel& vocab() const noexcept { return vocab_; }
  const AmountQuantizer& amounts() const noexcept { return amounts_; }
  const DateQuantizer& dates() const noexcept { return dates_; }

  // Months must hold normalized wordings. mono: [BOS] S [EOS] where S runs
  // over all given months in order; bi: exactly two months,
  // [BOS] S1 [SEP] S2 [EOS]. With max_tokens > 0, whole trailing events are
  // dropped (in bi mode from the longer segment) until the sequence fits;
  // each segment keeps at least one event.
  TokenizedSequence assemble(std::span<const corpus::Month> months, NspRole role,
                             std::size_t max_tokens = 0) const;

  void pad_to(TokenizedSequence& seq, std::size_t length) const;

  // Three lines in the "[BOS] | piece | ... | [EOS]" style: wordings, day
  // fractions, event amounts in euros.
  std::string listing(const TokenizedSequence& seq) const;

  // Directory layout: vocab.tsv and amounts.json.
  void save(const std::filesystem::path& dir) const;
  static Tokenizer load(const std::filesystem::path& dir);

 private:
  VocabModel vocab_;
  AmountQuantizer amounts_;
  DateQuantizer dates_;
};

TokenizedSequence assemble(const VocabModel& vocab, const AmountQuantizer& aq,
                           const DateQuantizer& dq, std::span<const corpus::Month> months,
                           NspRole role);

}  // namespace btf::tokenize
