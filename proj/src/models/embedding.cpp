#include "btf/models/embedding.hpp"

#include "btf/common/error.hpp"
#include "btf/numeric/ops.hpp"

namespace btf::models {

std::vector<bool> EncoderInput::key_mask(std::size_t b) const {
  const auto first = mask.begin() + static_cast<std::ptrdiff_t>(b * stride);
  return std::vector<bool>(first, first + static_cast<std::ptrdiff_t>(stride));
}

EncoderInput make_input(std::span<const tokenize::TokenizedSequence> seqs,
                        const tokenize::Tokenizer& tokenizer) {
  if (seqs.empty()) throw InputError("make_input: empty batch");
  EncoderInput in;
  in.batch = seqs.size();
  for (const auto& s : seqs) {
    if (s.true_length() == 0) throw InputError("make_input: empty sequence");
    in.stride = std::max(in.stride, s.size());
  }
  for (const auto& s : seqs) {
    auto padded = s;
    tokenizer.pad_to(padded, in.stride);
    in.x_ids.insert(in.x_ids.end(), padded.x_ids.begin(), padded.x_ids.end());
    in.a_ids.insert(in.a_ids.end(), padded.a_ids.begin(), padded.a_ids.end());
    in.d_ids.insert(in.d_ids.end(), padded.d_ids.begin(), padded.d_ids.end());
    in.t_ids.insert(in.t_ids.end(), padded.t_ids.begin(), padded.t_ids.end());
    in.mask.insert(in.mask.end(), padded.attn_mask.begin(), padded.attn_mask.end());
    in.lengths.push_back(s.true_length());
  }
  return in;
}

EncoderInput make_input(const tokenize::TokenizedSequence& seq, const tokenize::Tokenizer& tokenizer) {
  return make_input(std::span<const tokenize::TokenizedSequence>(&seq, 1), tokenizer);
}

template <typename T>
numeric::Tensor<T> MultimodalEmbedding<T>::embed(const EncoderInput& in) const {
  using namespace numeric;
  auto e = add(embedding(x, in.x_ids, "wording"), embedding(a, in.a_ids, "amount"));
  e = add(e, embedding(d, in.d_ids, "date"));
  return add(e, embedding(t, in.t_ids, "identity"));
}

template struct MultimodalEmbedding<float>;
template struct MultimodalEmbedding<double>;

}  // namespace btf::models
