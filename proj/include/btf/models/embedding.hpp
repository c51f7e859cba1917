#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "btf/numeric/optim.hpp"
#include "btf/tokenize/assemble.hpp"

namespace btf::models {

// A padded batch in row layout: sequence b occupies rows b * stride .. + stride.
struct EncoderInput {
  std::size_t batch = 0;
  std::size_t stride = 0;
  std::vector<int> x_ids, a_ids, d_ids, t_ids;  // batch * stride each
  std::vector<bool> mask;
  std::vector<std::size_t> lengths;             // true lengths

  std::size_t rows() const noexcept { return batch * stride; }
  std::size_t bos_row(std::size_t b) const noexcept { return b * stride; }
  std::size_t eos_row(std::size_t b) const noexcept { return b * stride + lengths[b] - 1; }
  // Key mask of sequence b (stride entries).
  std::vector<bool> key_mask(std::size_t b) const;
};

// Pads every sequence to the longest one with the tokenizer's [PAD] ids.
EncoderInput make_input(std::span<const tokenize::TokenizedSequence> seqs,
                        const tokenize::Tokenizer& tokenizer);
EncoderInput make_input(const tokenize::TokenizedSequence& seq, const tokenize::Tokenizer& tokenizer);

// E0 = X[x] + A[a] + D[d] + T[t].
template <typename T>
struct MultimodalEmbedding {
  numeric::Tensor<T> x, a, d, t;

  numeric::Tensor<T> embed(const EncoderInput& in) const;
};

}  // namespace btf::models
