#include "btf/numeric/tensor.hpp"

#include <algorithm>

#include "btf/common/error.hpp"

namespace btf::numeric {

std::size_t numel_of(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor() : node_(std::make_shared<TensorNode<T>>()) {
  node_->shape = {0};
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<TensorNode<T>>()) {
  node_->data.assign(numel_of(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<TensorNode<T>>()) {
  if (numel_of(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  node_->data.assign(values.begin(), values.end());
  node_->shape = std::move(shape);
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return node_->shape[axis];
}

template <typename T>
std::size_t Tensor<T>::rows() const noexcept {
  const auto& s = node_->shape;
  if (s.empty()) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

template <typename T>
std::size_t Tensor<T>::cols() const noexcept {
  return node_->shape.empty() ? 1 : node_->shape.back();
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) noexcept {
  node_->requires_grad = on;
  return *this;
}

template <typename T>
T* Tensor<T>::grad_data() const {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
  return node_->grad.data();
}

template <typename T>
void Tensor<T>::zero_grad() noexcept {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::clear_grad() noexcept {
  Storage<T>().swap(node_->grad);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out;
  out.node_->shape = node_->shape;
  out.node_->data = node_->data;
  return out;
}

namespace {

template <typename T>
Tape<T>*& active_tape() noexcept {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}

}  // namespace

template <typename T>
Tape<T>::Tape() : previous_(active_tape<T>()) {
  active_tape<T>() = this;
}

template <typename T>
Tape<T>::~Tape() {
  active_tape<T>() = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() noexcept {
  return active_tape<T>();
}

template <typename T>
void Tape<T>::record(std::function<void()> backward) {
  closures_.push_back(std::move(backward));
}

template <typename T>
void Tape<T>::backward(Tensor<T>& loss) {
  if (loss.numel() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
  // No recording while gradients flow.
  Tape<T>* saved = active_tape<T>();
  active_tape<T>() = nullptr;
  loss.grad_data()[0] += T(1);
  for (auto it = closures_.rbegin(); it != closures_.rend(); ++it) (*it)();
  closures_.clear();
  active_tape<T>() = saved;
}

template <typename T>
NoGrad<T>::NoGrad() : saved_(active_tape<T>()) {
  active_tape<T>() = nullptr;
}

template <typename T>
NoGrad<T>::~NoGrad() {
  active_tape<T>() = saved_;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class NoGrad<float>;
template class NoGrad<double>;

}  // namespace btf::numeric
