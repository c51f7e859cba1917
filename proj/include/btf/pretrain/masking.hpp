#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "btf/common/rng.hpp"
#include "btf/tokenize/assemble.hpp"

namespace btf::pretrain {

struct MaskedSequence {
  tokenize::TokenizedSequence seq;
  std::vector<std::pair<std::size_t, int>> p_mwm;  // (position, original wording id)
  std::vector<std::pair<std::size_t, int>> p_mam;  // (position, original amount id)
};

// Each event is drawn independently for wording masking (p_mwm) and amount
// masking (p_mam); a drawn event has every position of its span replaced by
// [MASK] in that stream and every position listed as a target.
MaskedSequence apply_masking(const tokenize::TokenizedSequence& seq, Rng& rng, double p_mwm,
                             double p_mam, int x_mask, int a_mask);
MaskedSequence apply_masking(const tokenize::TokenizedSequence& seq, Rng& rng, double p_mwm,
                             double p_mam, const tokenize::Tokenizer& tokenizer);

}  // namespace btf::pretrain
