#include "btf/pretrain/masking.hpp"

namespace btf::pretrain {

MaskedSequence apply_masking(const tokenize::TokenizedSequence& seq, Rng& rng, double p_mwm,
                             double p_mam, int x_mask, int a_mask) {
  MaskedSequence out{seq, {}, {}};
  for (const auto& [start, end] : seq.event_spans) {
    // Both draws happen for every event so the stream of random numbers does
    // not depend on earlier outcomes.
    const bool word = rng.bernoulli(p_mwm);
    const bool amount = rng.bernoulli(p_mam);
    for (std::size_t p = start; p < end; ++p) {
      if (word) {
        out.p_mwm.emplace_back(p, seq.x_ids[p]);
        out.seq.x_ids[p] = x_mask;
      }
      if (amount) {
        out.p_mam.emplace_back(p, seq.a_ids[p]);
        out.seq.a_ids[p] = a_mask;
      }
    }
  }
  return out;
}

MaskedSequence apply_masking(const tokenize::TokenizedSequence& seq, Rng& rng, double p_mwm,
                             double p_mam, const tokenize::Tokenizer& tokenizer) {
  return apply_masking(seq, rng, p_mwm, p_mam, tokenizer.vocab().control().mask,
                       tokenizer.amounts().control().mask);
}

}  // namespace btf::pretrain
