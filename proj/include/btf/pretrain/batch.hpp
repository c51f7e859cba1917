#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "btf/models/embedding.hpp"
#include "btf/pretrain/masking.hpp"

namespace btf::pretrain {

// Masked sequences padded into one encoder input. Target positions are
// expressed as rows of the padded layout.
struct PretrainBatch {
  models::EncoderInput input;
  std::vector<std::size_t> mwm_rows;
  std::vector<int> mwm_targets;
  std::vector<std::size_t> mam_rows;
  std::vector<int> mam_targets;
  std::vector<int> nsp_labels;  // one per sequence; empty when NSP is not scored
};

PretrainBatch make_batch(std::span<const MaskedSequence> seqs, std::span<const int> nsp_labels,
                         const tokenize::Tokenizer& tokenizer);

}  // namespace btf::pretrain
