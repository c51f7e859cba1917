#include "btf/numeric/optim.hpp"

#include <cmath>

namespace btf::numeric {

template <typename T>
AdamW<T>::AdamW(ParamList<T> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

template <typename T>
void AdamW<T>::step(double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& w = params_[k].tensor;
    if (!w.has_grad()) continue;
    const auto g = w.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.numel(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      const double wi = static_cast<double>(w[i]);
      w[i] = static_cast<T>(wi - lr * (update + config_.weight_decay * wi));
    }
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double lr_schedule(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_frac) {
  if (total_steps == 0 || step >= total_steps) return 0.0;
  const double total = static_cast<double>(total_steps);
  const double warm = warmup_frac * total;
  const double s = static_cast<double>(step);
  if (s < warm) return peak_lr * s / warm;
  return peak_lr * (total - s) / (total - warm);
}

template <typename T>
double clip_grad_norm(ParamList<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T f = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      T* g = p.tensor.grad_data();
      for (std::size_t i = 0; i < p.tensor.numel(); ++i) g[i] *= f;
    }
  }
  return norm;
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm(ParamList<float>&, double);
template double clip_grad_norm(ParamList<double>&, double);

}  // namespace btf::numeric
