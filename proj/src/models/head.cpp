#include "btf/models/head.hpp"

#include <algorithm>

#include "btf/models/encoder.hpp"
#include "btf/numeric/ops.hpp"

namespace btf::models {

template <typename T>
LinearHead<T> LinearHead<T>::create(std::size_t d, std::size_t k, Rng& rng) {
  LinearHead h{numeric::Tensor<T>(numeric::Shape{d, k}), numeric::Tensor<T>(numeric::Shape{k})};
  xavier_uniform(h.w, rng);
  h.w.set_requires_grad(true);
  h.b.set_requires_grad(true);
  return h;
}

template <typename T>
numeric::Tensor<T> LinearHead<T>::operator()(const numeric::Tensor<T>& x) const {
  return numeric::add_bias(numeric::matmul(x, w), b);
}

template <typename T>
void LinearHead<T>::append_params(numeric::ParamList<T>& list, const std::string& prefix) const {
  list.push_back({prefix + ".w", w});
  list.push_back({prefix + ".b", b});
}

template <typename T>
std::vector<int> argmax_rows(const numeric::Tensor<T>& logits) {
  const std::size_t r = logits.rows(), c = logits.cols();
  std::vector<int> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const T* row = logits.data() + i * c;
    out[i] = static_cast<int>(std::max_element(row, row + c) - row);
  }
  return out;
}

template struct LinearHead<float>;
template struct LinearHead<double>;
template std::vector<int> argmax_rows(const numeric::Tensor<float>&);
template std::vector<int> argmax_rows(const numeric::Tensor<double>&);

}  // namespace btf::models
