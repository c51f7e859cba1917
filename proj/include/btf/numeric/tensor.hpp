#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "btf/numeric/alloc.hpp"

namespace btf::numeric {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

template <typename T>
using Storage = std::vector<T, TrackingAllocator<T>>;

template <typename T>
struct TensorNode {
  Shape shape;
  Storage<T> data;
  Storage<T> grad;  // empty until first accumulation
  bool requires_grad = false;
};

// Dense row-major array with an optional gradient buffer. Copies share the
// underlying node; clone() makes an independent copy.
template <typename T>
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const noexcept { return node_->shape; }
  std::size_t rank() const noexcept { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return node_->data.size(); }
  // Rows and columns of the 2-D view that folds all leading axes.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  T* data() noexcept { return node_->data.data(); }
  const T* data() const noexcept { return node_->data.data(); }
  std::span<T> values() noexcept { return {node_->data.data(), node_->data.size()}; }
  std::span<const T> values() const noexcept { return {node_->data.data(), node_->data.size()}; }
  T& operator[](std::size_t i) noexcept { return node_->data[i]; }
  const T& operator[](std::size_t i) const noexcept { return node_->data[i]; }
  T item() const;

  bool requires_grad() const noexcept { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) noexcept;
  bool has_grad() const noexcept { return !node_->grad.empty(); }
  // Allocates a zero gradient buffer on first use.
  T* grad_data() const;
  std::span<const T> grad() const noexcept { return {node_->grad.data(), node_->grad.size()}; }
  void zero_grad() noexcept;
  void clear_grad() noexcept;

  Tensor clone() const;
  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }
  const std::shared_ptr<TensorNode<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Reverse-mode tape. Constructing a Tape makes it the active tape of the
// calling thread; ops record backward closures only while a tape is active
// and some input requires a gradient. Without a tape every op runs in
// inference mode and keeps nothing alive.
template <typename T>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() noexcept;
  void record(std::function<void()> backward);
  // Seeds d(loss)/d(loss) = 1 and runs recorded closures newest first.
  // The tape is cleared afterwards.
  void backward(Tensor<T>& loss);
  std::size_t size() const noexcept { return closures_.size(); }

 private:
  std::vector<std::function<void()>> closures_;
  Tape* previous_ = nullptr;
};

// Suspends the active tape for the guard's lifetime.
template <typename T>
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  Tape<T>* saved_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template class NoGrad<float>;
extern template class NoGrad<double>;

}  // namespace btf::numeric
