#include "btf/pretrain/batch.hpp"

#include "btf/common/error.hpp"

namespace btf::pretrain {

PretrainBatch make_batch(std::span<const MaskedSequence> seqs, std::span<const int> nsp_labels,
                         const tokenize::Tokenizer& tokenizer) {
  if (!nsp_labels.empty() && nsp_labels.size() != seqs.size()) {
    throw ShapeError("make_batch: " + std::to_string(nsp_labels.size()) + " NSP labels for " +
                     std::to_string(seqs.size()) + " sequences");
  }
  std::vector<tokenize::TokenizedSequence> plain;
  plain.reserve(seqs.size());
  for (const auto& s : seqs) plain.push_back(s.seq);
  PretrainBatch batch;
  batch.input = models::make_input(plain, tokenizer);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const std::size_t base = b * batch.input.stride;
    for (const auto& [pos, id] : seqs[b].p_mwm) {
      batch.mwm_rows.push_back(base + pos);
      batch.mwm_targets.push_back(id);
    }
    for (const auto& [pos, id] : seqs[b].p_mam) {
      batch.mam_rows.push_back(base + pos);
      batch.mam_targets.push_back(id);
    }
  }
  batch.nsp_labels.assign(nsp_labels.begin(), nsp_labels.end());
  return batch;
}

}  // namespace btf::pretrain
