#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "btf/numeric/tensor.hpp"

namespace btf::numeric {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

template <typename T>
std::size_t element_count(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   w <- w - lr (m_hat / (sqrt(v_hat) + eps) + wd w)
// Moments are kept in double precision whatever T is.
template <typename T>
class AdamW {
 public:
  AdamW(ParamList<T> params, AdamWConfig config);

  // Parameters without a gradient buffer are left untouched.
  void step(double lr);
  void zero_grad();
  std::size_t steps() const noexcept { return t_; }
  const ParamList<T>& params() const noexcept { return params_; }

 private:
  ParamList<T> params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// Linear warmup to peak_lr over warmup_frac * total_steps, then linear decay
// to 0 at total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_frac);

// Rescales all gradients so their global L2 norm is at most max_norm (no-op
// when max_norm <= 0). Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParamList<T>& params, double max_norm);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace btf::numeric
