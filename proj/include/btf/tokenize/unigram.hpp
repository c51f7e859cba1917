#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "btf/tokenize/vocab.hpp"

namespace btf::tokenize {

struct UnigramOptions {
  std::size_t target_size = 1000;        // includes control tokens and protected tags
  std::size_t max_piece_symbols = 16;
  std::size_t seed_size = 0;             // 0: 8 x target_size
  double shrink = 0.75;                  // fraction of pieces kept per pruning round
  std::size_t em_iterations = 2;         // EM sweeps between pruning rounds
};

// Trains a unigram vocabulary on separator-encoded wordings (see encode_wording).
// Hard EM: Viterbi counts, re-estimated probabilities, loss-ranked pruning.
// Throws ConfigError if the target cannot hold the required single symbols and
// TrainingError if the corpus offers fewer candidate pieces than the target.
VocabModel train_unigram(const std::vector<std::string>& encoded_wordings,
                         const UnigramOptions& options);

}  // namespace btf::tokenize
