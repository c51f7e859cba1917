#pragma once

#include <cstdint>
#include <string>

#include "btf/common/rng.hpp"
#include "btf/numeric/optim.hpp"

namespace btf::models {

// Affine projection d -> k used by every task head.
template <typename T>
struct LinearHead {
  numeric::Tensor<T> w;  // [d, k]
  numeric::Tensor<T> b;  // [k]

  static LinearHead create(std::size_t d, std::size_t k, Rng& rng);
  numeric::Tensor<T> operator()(const numeric::Tensor<T>& x) const;
  std::size_t outputs() const { return b.numel(); }
  void append_params(numeric::ParamList<T>& list, const std::string& prefix) const;
};

// Row-wise argmax of a logits matrix.
template <typename T>
std::vector<int> argmax_rows(const numeric::Tensor<T>& logits);

}  // namespace btf::models
