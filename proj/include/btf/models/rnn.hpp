#pragma once

#include <array>
#include <vector>

#include "btf/common/rng.hpp"
#include "btf/models/config.hpp"
#include "btf/models/embedding.hpp"

namespace btf::models {

struct ForwardContext {
  bool train = false;
  Rng* rng = nullptr;  // required when train and dropout > 0
};

template <typename T>
struct EncoderOutput {
  numeric::Tensor<T> hidden;  // [rows, d], rows laid out as in EncoderInput
  numeric::Tensor<T> cls;     // [batch, d]
};

// Bidirectional LSTM-with-projection stack. Per layer the two directions are
// layer-normalized and summed; that sum feeds the next layer. The output is
// the softmax(mix)-weighted sum of {E0, layer 1..L} plus a parameter-free
// self-attention pass over that sum (residual). cls = out[BOS] + out[EOS].
template <typename T>
struct RnnEncoderState {
  struct Direction {
    numeric::Tensor<T> wx, wr, bx, br, proj, ln_g, ln_b;
  };
  std::vector<std::array<Direction, 2>> layers;  // [l][0] forward, [l][1] backward
  numeric::Tensor<T> mix;

  EncoderOutput<T> encode(const EncoderConfig& config, const numeric::Tensor<T>& e0,
                          const EncoderInput& in, const ForwardContext& ctx) const;
};

}  // namespace btf::models
