#pragma once

#include <vector>

#include "btf/models/rnn.hpp"

namespace btf::models {

// Post-norm Transformer encoder without positional encoding:
//   x = LN(x + MHA(x)),  x = LN(x + W2 gelu(W1 x + b1) + b2).
// Pad keys get zero attention weight. cls = out[BOS].
template <typename T>
struct TransformerEncoderState {
  struct Layer {
    numeric::Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo, w1, b1, w2, b2, ln1_g, ln1_b, ln2_g, ln2_b;
  };
  std::vector<Layer> layers;

  EncoderOutput<T> encode(const EncoderConfig& config, const numeric::Tensor<T>& e0,
                          const EncoderInput& in, const ForwardContext& ctx) const;
};

}  // namespace btf::models
