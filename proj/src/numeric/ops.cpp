#include "btf/numeric/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "btf/common/error.hpp"
#include "btf/numeric/parallel.hpp"

namespace btf::numeric {

namespace {

template <typename T>
bool wants_grad(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record(Tensor<T>& out, std::function<void()> fn) {
  out.set_requires_grad(true);
  Tape<T>::active()->record(std::move(fn));
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

std::size_t grain_for(std::size_t work_per_index) {
  constexpr std::size_t kTarget = 1 << 15;
  return std::max<std::size_t>(1, kTarget / std::max<std::size_t>(1, work_per_index));
}

// C[m, n] (+)= op(A)[m, k] . op(B)[k, n]. A is stored [m, k] or, when ta,
// [k, m]; likewise B. Rows of C are independent, so they are split freely.
template <typename T>
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const T* A, const T* B,
          T* C, bool accumulate) {
  parallel_for(0, m, grain_for(n * k), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      T* c = C + i * n;
      if (!accumulate) std::fill(c, c + n, T(0));
      if (!tb) {
        for (std::size_t p = 0; p < k; ++p) {
          const T a = ta ? A[p * m + i] : A[i * k + p];
          if (a == T(0)) continue;
          const T* b = B + p * n;
          for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
        }
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          const T* b = B + j * k;
          T s = 0;
          if (!ta) {
            const T* a = A + i * k;
            for (std::size_t p = 0; p < k; ++p) s += a[p] * b[p];
          } else {
            for (std::size_t p = 0; p < k; ++p) s += A[p * m + i] * b[p];
          }
          c[j] += s;
        }
      }
    }
  });
}

template <typename T>
void require_2d(const char* op, const Tensor<T>& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(t.shape()));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const std::size_t m = trans_a ? a.dim(1) : a.dim(0);
  const std::size_t k = trans_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = trans_b ? b.dim(1) : b.dim(0);
  const std::size_t n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb) mismatch("matmul", a.shape(), b.shape());
  Tensor<T> out(Shape{m, n});
  gemm(trans_a, trans_b, m, n, k, a.data(), b.data(), out.data(), false);
  if (wants_grad<T>({&a, &b})) {
    record(out, [a, b, out, m, n, k, trans_a, trans_b]() mutable {
      if (!out.has_grad()) return;
      const T* dc = out.grad().data();
      if (a.requires_grad()) {
        if (!trans_a) gemm(false, !trans_b, m, k, n, dc, b.data(), a.grad_data(), true);
        else gemm(trans_b, true, k, m, n, b.data(), dc, a.grad_data(), true);
      }
      if (b.requires_grad()) {
        if (!trans_b) gemm(!trans_a, false, k, n, m, a.data(), dc, b.grad_data(), true);
        else gemm(true, trans_a, n, k, m, dc, a.data(), b.grad_data(), true);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) mismatch("add", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  if (wants_grad<T>({&a, &b})) {
    record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        T* d = t->grad_data();
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias) {
  const std::size_t r = a.rows(), c = a.cols();
  if (bias.numel() != c) mismatch("add_bias", a.shape(), bias.shape());
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a[i * c + j] + bias[j];
  }
  if (wants_grad<T>({&a, &bias})) {
    record(out, [a, bias, out, r, c]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      if (a.requires_grad()) {
        T* d = a.grad_data();
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (bias.requires_grad()) {
        T* d = bias.grad_data();
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) mismatch("mul", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  if (wants_grad<T>({&a, &b})) {
    record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      if (a.requires_grad()) {
        T* d = a.grad_data();
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * b[i];
      }
      if (b.requires_grad()) {
        T* d = b.grad_data();
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * factor;
  if (wants_grad<T>({&a})) {
    record(out, [a, out, factor]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* d = a.grad_data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
  Tensor<T> out = Tensor<T>::scalar(s);
  if (wants_grad<T>({&a})) {
    record(out, [a, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      T* d = a.grad_data();
      for (std::size_t i = 0; i < a.numel(); ++i) d[i] += g;
    });
  }
  return out;
}

namespace {

// outer x axis x inner decomposition of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size()) mismatch("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) mismatch("concat", first, s);
    }
    shape[axis] += s[axis];
  }
  Tensor<T> out(shape);
  const auto total = split_at(shape, axis);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto sp = split_at(p.shape(), axis);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(p.data() + o * sp.extent * sp.inner, sp.extent * sp.inner,
                  out.data() + (o * total.extent + offset) * total.inner);
    }
    offsets.push_back(offset);
    offset += sp.extent;
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (any && Tape<T>::active()) {
    record(out, [parts, out, offsets, axis, total]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      for (std::size_t k = 0; k < parts.size(); ++k) {
        auto& p = parts[k];
        if (!p.requires_grad()) continue;
        const auto sp = split_at(p.shape(), axis);
        T* d = p.grad_data();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const T* src = g.data() + (o * total.extent + offsets[k]) * total.inner;
          T* dst = d + o * sp.extent * sp.inner;
          for (std::size_t i = 0; i < sp.extent * sp.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t end) {
  if (axis >= a.rank() || start > end || end > a.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " invalid for " + shape_str(a.shape()));
  }
  Shape shape = a.shape();
  shape[axis] = end - start;
  Tensor<T> out(shape);
  const auto sa = split_at(a.shape(), axis);
  const std::size_t len = (end - start) * sa.inner;
  for (std::size_t o = 0; o < sa.outer; ++o) {
    std::copy_n(a.data() + (o * sa.extent + start) * sa.inner, len, out.data() + o * len);
  }
  if (wants_grad<T>({&a})) {
    record(out, [a, out, sa, start, len]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* d = a.grad_data();
      for (std::size_t o = 0; o < sa.outer; ++o) {
        T* dst = d + (o * sa.extent + start) * sa.inner;
        for (std::size_t i = 0; i < len; ++i) dst[i] += g[o * len + i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel_of(shape) != a.numel()) mismatch("reshape", a.shape(), shape);
  Tensor<T> out(std::move(shape));
  std::copy_n(a.data(), a.numel(), out.data());
  if (wants_grad<T>({&a})) {
    record(out, [a, out]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* d = a.grad_data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> gather_impl(const Tensor<T>& a, std::vector<std::size_t> rows) {
  const std::size_t c = a.cols();
  Tensor<T> out(Shape{rows.size(), c});
  for (std::size_t n = 0; n < rows.size(); ++n) std::copy_n(a.data() + rows[n] * c, c, out.data() + n * c);
  if (wants_grad<T>({&a})) {
    record(out, [a, out, rows = std::move(rows), c]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* d = a.grad_data();
      for (std::size_t n = 0; n < rows.size(); ++n) {
        for (std::size_t j = 0; j < c; ++j) d[rows[n] * c + j] += g[n * c + j];
      }
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const int> ids, std::string_view stream) {
  require_2d("embedding", table);
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t n = 0; n < ids.size(); ++n) {
    if (ids[n] < 0 || static_cast<std::size_t>(ids[n]) >= table.dim(0)) {
      throw LookupError(std::string(stream) + " id " + std::to_string(ids[n]) + " at position " +
                        std::to_string(n) + " outside table of " + std::to_string(table.dim(0)) + " rows");
    }
    rows[n] = static_cast<std::size_t>(ids[n]);
  }
  return gather_impl(table, std::move(rows));
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::span<const std::size_t> rows) {
  for (auto r : rows) {
    if (r >= a.rows()) throw ShapeError("gather_rows: row " + std::to_string(r) + " outside " + shape_str(a.shape()));
  }
  return gather_impl(a, std::vector<std::size_t>(rows.begin(), rows.end()));
}

template <typename T>
Tensor<T> segment_mean(const Tensor<T>& a, std::span<const std::pair<std::size_t, std::size_t>> spans) {
  const std::size_t c = a.cols();
  std::vector<std::pair<std::size_t, std::size_t>> sp(spans.begin(), spans.end());
  for (const auto& [lo, hi] : sp) {
    if (lo >= hi || hi > a.rows()) throw ShapeError("segment_mean: bad span for " + shape_str(a.shape()));
  }
  Tensor<T> out(Shape{sp.size(), c});
  for (std::size_t e = 0; e < sp.size(); ++e) {
    const T inv = T(1) / static_cast<T>(sp[e].second - sp[e].first);
    for (std::size_t r = sp[e].first; r < sp[e].second; ++r) {
      for (std::size_t j = 0; j < c; ++j) out[e * c + j] += a[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[e * c + j] *= inv;
  }
  if (wants_grad<T>({&a})) {
    record(out, [a, out, sp = std::move(sp), c]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* d = a.grad_data();
      for (std::size_t e = 0; e < sp.size(); ++e) {
        const T inv = T(1) / static_cast<T>(sp[e].second - sp[e].first);
        for (std::size_t r = sp[e].first; r < sp[e].second; ++r) {
          for (std::size_t j = 0; j < c; ++j) d[r * c + j] += g[e * c + j] * inv;
        }
      }
    });
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> softmax_impl(const Tensor<T>& a, const std::vector<bool>* key_mask) {
  const std::size_t r = a.rows(), c = a.cols();
  if (key_mask && key_mask->size() != c) {
    throw ShapeError("masked_softmax: mask of " + std::to_string(key_mask->size()) +
                     " keys for scores " + shape_str(a.shape()));
  }
  Tensor<T> out(a.shape());
  parallel_for(0, r, grain_for(c), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const T* x = a.data() + i * c;
      T* y = out.data() + i * c;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < c; ++j) {
        if (!key_mask || (*key_mask)[j]) mx = std::max(mx, x[j]);
      }
      if (mx == -std::numeric_limits<T>::infinity()) continue;  // nothing to attend to
      T s = 0;
      for (std::size_t j = 0; j < c; ++j) {
        y[j] = (!key_mask || (*key_mask)[j]) ? std::exp(x[j] - mx) : T(0);
        s += y[j];
      }
      for (std::size_t j = 0; j < c; ++j) y[j] /= s;
    }
  });
  if (wants_grad<T>({&a})) {
    record(out, [a, out, r, c]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* d = a.grad_data();
      for (std::size_t i = 0; i < r; ++i) {
        const T* y = out.data() + i * c;
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += y[j] * g[i * c + j];
        for (std::size_t j = 0; j < c; ++j) d[i * c + j] += y[j] * (g[i * c + j] - dot);
      }
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  return softmax_impl(a, nullptr);
}

template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, const std::vector<bool>& key_mask) {
  return softmax_impl(scores, &key_mask);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  if (!(eps > T(0))) throw ConfigError("layer_norm: eps must be > 0");
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.numel() != c) mismatch("layer_norm", x.shape(), gain.shape());
  if (bias.numel() != c) mismatch("layer_norm", x.shape(), bias.shape());
  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.numel()), inv_sd(r);
  for (std::size_t i = 0; i < r; ++i) {
    const T* v = x.data() + i * c;
    T mean = 0;
    for (std::size_t j = 0; j < c; ++j) mean += v[j];
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (v[j] - mean) * (v[j] - mean);
    var /= static_cast<T>(c);
    inv_sd[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (v[j] - mean) * inv_sd[i];
      out[i * c + j] = gain[j] * xhat[i * c + j] + bias[j];
    }
  }
  if (wants_grad<T>({&x, &gain, &bias})) {
    record(out, [x, gain, bias, out, xhat = std::move(xhat), inv_sd = std::move(inv_sd), r, c]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      if (gain.requires_grad()) {
        T* d = gain.grad_data();
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j] * xhat[i * c + j];
        }
      }
      if (bias.requires_grad()) {
        T* d = bias.grad_data();
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j];
        }
      }
      if (x.requires_grad()) {
        T* d = x.grad_data();
        for (std::size_t i = 0; i < r; ++i) {
          T m1 = 0, m2 = 0;
          for (std::size_t j = 0; j < c; ++j) {
            const T dx = g[i * c + j] * gain[j];
            m1 += dx;
            m2 += dx * xhat[i * c + j];
          }
          m1 /= static_cast<T>(c);
          m2 /= static_cast<T>(c);
          for (std::size_t j = 0; j < c; ++j) {
            const T dx = g[i * c + j] * gain[j];
            d[i * c + j] += inv_sd[i] * (dx - m1 - xhat[i * c + j] * m2);
          }
        }
      }
    });
  }
  return out;
}

namespace {

template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& a, F f, D df) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);
  if (wants_grad<T>({&a})) {
    record(out, [a, out, df]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* d = a.grad_data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * df(a[i], out[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::acos(T(-1)));
  return unary(
      a, [=](T x) { return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2)); },
      [=](T x, T) {
        return T(0.5) * (T(1) + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(T(-0.5) * x * x);
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double p, bool train, Rng& rng) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout: p must be < 1");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(a.numel());
  for (auto& m : mask) m = rng.bernoulli(p) ? T(0) : keep_scale;
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * mask[i];
  if (wants_grad<T>({&a})) {
    record(out, [a, out, mask = std::move(mask)]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* d = a.grad_data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * mask[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets,
                        const std::vector<bool>& mask) {
  const std::size_t r = logits.rows(), c = logits.cols();
  if (targets.size() != r || mask.size() != r) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets and " +
                     std::to_string(mask.size()) + " mask entries for logits " + shape_str(logits.shape()));
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < r; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c) {
      throw LookupError("cross_entropy: target " + std::to_string(targets[i]) + " outside " +
                        std::to_string(c) + " classes");
    }
    ++count;
  }
  Tensor<T> out = Tensor<T>::scalar(T(0));
  if (count == 0) return out;
  std::vector<T> probs(r * c, T(0));
  T total = 0;
  for (std::size_t i = 0; i < r; ++i) {
    if (!mask[i]) continue;
    const T* x = logits.data() + i * c;
    const T mx = *std::max_element(x, x + c);
    T s = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(x[j] - mx);
      s += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= s;
    total += -(x[targets[i]] - mx - std::log(s));
  }
  out[0] = total / static_cast<T>(count);
  if (wants_grad<T>({&logits})) {
    std::vector<int> tg(targets.begin(), targets.end());
    record(out, [logits, out, probs = std::move(probs), tg = std::move(tg), mask, count, r, c]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0] / static_cast<T>(count);
      T* d = logits.grad_data();
      for (std::size_t i = 0; i < r; ++i) {
        if (!mask[i]) continue;
        for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g * probs[i * c + j];
        d[i * c + static_cast<std::size_t>(tg[i])] -= g;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& parts, const Tensor<T>& weights) {
  if (parts.empty() || weights.numel() != parts.size()) {
    throw ShapeError("weighted_sum: " + std::to_string(parts.size()) + " parts for weights " +
                     shape_str(weights.shape()));
  }
  const Shape& shape = parts[0].shape();
  Tensor<T> out(shape);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].shape() != shape) mismatch("weighted_sum", shape, parts[k].shape());
    const T w = weights[k];
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += w * parts[k][i];
  }
  bool any = weights.requires_grad();
  for (const auto& p : parts) any = any || p.requires_grad();
  if (any && Tape<T>::active()) {
    record(out, [parts, weights, out]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (weights.requires_grad()) {
          T s = 0;
          for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * parts[k][i];
          weights.grad_data()[k] += s;
        }
        if (parts[k].requires_grad()) {
          T* d = parts[k].grad_data();
          const T w = weights[k];
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * w;
        }
      }
    });
  }
  return out;
}

namespace {

template <typename T>
T sigm(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
Tensor<T> lstm_recurrence(const Tensor<T>& gx, const Tensor<T>& w_rec, const Tensor<T>& proj,
                          std::span<const std::size_t> lengths, std::size_t stride, bool reverse) {
  require_2d("lstm_recurrence", gx);
  require_2d("lstm_recurrence", w_rec);
  require_2d("lstm_recurrence", proj);
  const std::size_t h4 = gx.cols(), h = h4 / 4, d = proj.dim(1);
  if (h4 % 4 != 0 || w_rec.dim(0) != d || w_rec.dim(1) != h4) mismatch("lstm_recurrence", gx.shape(), w_rec.shape());
  if (proj.dim(0) != h) mismatch("lstm_recurrence", gx.shape(), proj.shape());
  if (gx.rows() != lengths.size() * stride) {
    throw ShapeError("lstm_recurrence: " + std::to_string(lengths.size()) + " sequences of stride " +
                     std::to_string(stride) + " do not fit gates " + shape_str(gx.shape()));
  }
  const std::size_t batch = lengths.size();
  std::vector<std::size_t> order(batch);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });
  std::size_t steps = 0;
  for (auto len : lengths) {
    if (len > stride) throw ShapeError("lstm_recurrence: length exceeds stride");
    steps = std::max(steps, len);
  }
  std::vector<std::size_t> active(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    active[t] = static_cast<std::size_t>(
        std::count_if(lengths.begin(), lengths.end(), [t](std::size_t len) { return len > t; }));
  }
  auto row_of = [&, reverse](std::size_t a, std::size_t t) {
    const std::size_t b = order[a];
    return b * stride + (reverse ? lengths[b] - 1 - t : t);
  };

  const bool grad = wants_grad<T>({&gx, &w_rec, &proj});
  Tensor<T> out(Shape{gx.rows(), d});
  // Per step, for the active prefix: activated gates, cell state, projected output.
  std::vector<std::vector<T>> acts, cells, projs;
  if (grad) {
    acts.resize(steps);
    cells.resize(steps);
    projs.resize(steps);
  }
  std::vector<T> r_prev(batch * d, T(0)), c_prev(batch * h, T(0));
  std::vector<T> z(batch * h4), m(batch * h), r(batch * d);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t n = active[t];
    gemm(false, false, n, h4, d, r_prev.data(), w_rec.data(), z.data(), false);
    for (std::size_t a = 0; a < n; ++a) {
      const T* g = gx.data() + row_of(a, t) * h4;
      T* za = z.data() + a * h4;
      for (std::size_t j = 0; j < h4; ++j) za[j] += g[j];
      for (std::size_t j = 0; j < h; ++j) {
        const T i_g = sigm(za[j]);
        const T f_g = sigm(za[h + j]);
        const T g_g = std::tanh(za[2 * h + j]);
        const T o_g = sigm(za[3 * h + j]);
        const T c = f_g * c_prev[a * h + j] + i_g * g_g;
        c_prev[a * h + j] = c;
        m[a * h + j] = o_g * std::tanh(c);
        za[j] = i_g;
        za[h + j] = f_g;
        za[2 * h + j] = g_g;
        za[3 * h + j] = o_g;
      }
    }
    gemm(false, false, n, d, h, m.data(), proj.data(), r.data(), false);
    for (std::size_t a = 0; a < n; ++a) {
      std::copy_n(r.data() + a * d, d, out.data() + row_of(a, t) * d);
    }
    std::copy_n(r.data(), n * d, r_prev.data());
    if (grad) {
      acts[t].assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n * h4));
      cells[t].assign(c_prev.begin(), c_prev.begin() + static_cast<std::ptrdiff_t>(n * h));
      projs[t].assign(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(n * d));
    }
  }

  if (grad) {
    std::vector<std::size_t> len_copy(lengths.begin(), lengths.end());
    record(out, [gx, w_rec, proj, out, acts = std::move(acts), cells = std::move(cells),
                 projs = std::move(projs), active = std::move(active), order = std::move(order),
                 len_copy = std::move(len_copy), stride, reverse, steps, batch, h, h4, d]() mutable {
      if (!out.has_grad() || steps == 0) return;
      const auto dout = out.grad();
      auto row_of = [&](std::size_t a, std::size_t t) {
        const std::size_t b = order[a];
        return b * stride + (reverse ? len_copy[b] - 1 - t : t);
      };
      std::vector<T> dr_next(batch * d, T(0)), dc_next(batch * h, T(0));
      std::vector<T> dr(batch * d), dm(batch * h), m(batch * h), dz(batch * h4);
      T* dgx = gx.requires_grad() ? gx.grad_data() : nullptr;
      T* dw = w_rec.requires_grad() ? w_rec.grad_data() : nullptr;
      T* dp = proj.requires_grad() ? proj.grad_data() : nullptr;
      for (std::size_t t = steps; t-- > 0;) {
        const std::size_t n = active[t];
        const T* act = acts[t].data();
        const T* cell = cells[t].data();
        for (std::size_t a = 0; a < n; ++a) {
          const T* g = dout.data() + row_of(a, t) * d;
          for (std::size_t j = 0; j < d; ++j) dr[a * d + j] = g[j] + dr_next[a * d + j];
          for (std::size_t j = 0; j < h; ++j) {
            m[a * h + j] = act[a * h4 + 3 * h + j] * std::tanh(cell[a * h + j]);
          }
        }
        if (dp) gemm(true, false, h, d, n, m.data(), dr.data(), dp, true);
        gemm(false, true, n, h, d, dr.data(), proj.data(), dm.data(), false);
        for (std::size_t a = 0; a < n; ++a) {
          for (std::size_t j = 0; j < h; ++j) {
            const T i_g = act[a * h4 + j];
            const T f_g = act[a * h4 + h + j];
            const T g_g = act[a * h4 + 2 * h + j];
            const T o_g = act[a * h4 + 3 * h + j];
            const T tc = std::tanh(cell[a * h + j]);
            const T cp = t > 0 ? cells[t - 1][a * h + j] : T(0);
            const T dmv = dm[a * h + j];
            const T dc = dmv * o_g * (T(1) - tc * tc) + dc_next[a * h + j];
            dc_next[a * h + j] = dc * f_g;
            dz[a * h4 + j] = dc * g_g * i_g * (T(1) - i_g);
            dz[a * h4 + h + j] = dc * cp * f_g * (T(1) - f_g);
            dz[a * h4 + 2 * h + j] = dc * i_g * (T(1) - g_g * g_g);
            dz[a * h4 + 3 * h + j] = dmv * tc * o_g * (T(1) - o_g);
          }
          if (dgx) {
            T* dst = dgx + row_of(a, t) * h4;
            for (std::size_t j = 0; j < h4; ++j) dst[j] += dz[a * h4 + j];
          }
        }
        if (t > 0) {
          if (dw) gemm(true, false, d, h4, n, projs[t - 1].data(), dz.data(), dw, true);
          gemm(false, true, n, d, h4, dz.data(), w_rec.data(), dr_next.data(), false);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> streamed_self_attention(const Tensor<T>& x, std::span<const std::size_t> lengths,
                                  std::size_t stride) {
  require_2d("streamed_self_attention", x);
  const std::size_t d = x.cols();
  if (x.rows() != lengths.size() * stride) {
    throw ShapeError("streamed_self_attention: " + std::to_string(lengths.size()) +
                     " sequences of stride " + std::to_string(stride) + " do not fit " + shape_str(x.shape()));
  }
  for (auto len : lengths) {
    if (len > stride) throw ShapeError("streamed_self_attention: length exceeds stride");
  }
  const T inv = T(1) / std::sqrt(static_cast<T>(d));
  Tensor<T> out(x.shape());
  auto probs = [d, inv](const T* X, std::size_t i, std::size_t len, T* p) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < len; ++j) {
      T s = 0;
      for (std::size_t k = 0; k < d; ++k) s += X[i * d + k] * X[j * d + k];
      p[j] = s * inv;
      mx = std::max(mx, p[j]);
    }
    T z = 0;
    for (std::size_t j = 0; j < len; ++j) {
      p[j] = std::exp(p[j] - mx);
      z += p[j];
    }
    for (std::size_t j = 0; j < len; ++j) p[j] /= z;
  };
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    const std::size_t len = lengths[b];
    const T* X = x.data() + b * stride * d;
    T* Y = out.data() + b * stride * d;
    parallel_for(0, len, grain_for(len * d), [&](std::size_t lo, std::size_t hi) {
      std::vector<T> p(len);
      for (std::size_t i = lo; i < hi; ++i) {
        probs(X, i, len, p.data());
        for (std::size_t j = 0; j < len; ++j) {
          for (std::size_t k = 0; k < d; ++k) Y[i * d + k] += p[j] * X[j * d + k];
        }
      }
    });
  }
  if (wants_grad<T>({&x})) {
    std::vector<std::size_t> lens(lengths.begin(), lengths.end());
    record(out, [x, out, lens = std::move(lens), stride, d, inv, probs]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      T* dx_all = x.grad_data();
      for (std::size_t b = 0; b < lens.size(); ++b) {
        const std::size_t len = lens[b];
        const T* X = x.data() + b * stride * d;
        const T* G = g.data() + b * stride * d;
        T* DX = dx_all + b * stride * d;
        std::vector<T> p(len), ds(len);
        for (std::size_t i = 0; i < len; ++i) {
          probs(X, i, len, p.data());
          T dot = 0;
          for (std::size_t j = 0; j < len; ++j) {
            T dp = 0;
            for (std::size_t k = 0; k < d; ++k) dp += G[i * d + k] * X[j * d + k];
            ds[j] = dp;
            dot += p[j] * dp;
          }
          for (std::size_t j = 0; j < len; ++j) {
            const T s = p[j] * (ds[j] - dot) * inv;
            for (std::size_t k = 0; k < d; ++k) {
              DX[j * d + k] += p[j] * G[i * d + k] + s * X[i * d + k];
              DX[i * d + k] += s * X[j * d + k];
            }
          }
        }
      }
    });
  }
  return out;
}

#define BTF_INSTANTIATE(T)                                                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, bool, bool);                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                          \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const int>, std::string_view);         \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);                 \
  template Tensor<T> segment_mean(const Tensor<T>&,                                               \
                                  std::span<const std::pair<std::size_t, std::size_t>>);          \
  template Tensor<T> softmax(const Tensor<T>&);                                                   \
  template Tensor<T> masked_softmax(const Tensor<T>&, const std::vector<bool>&);                  \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);         \
  template Tensor<T> gelu(const Tensor<T>&);                                                      \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> tanh(const Tensor<T>&);                                                      \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);                               \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>, const std::vector<bool>&); \
  template Tensor<T> weighted_sum(const std::vector<Tensor<T>>&, const Tensor<T>&);               \
  template Tensor<T> lstm_recurrence(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                     std::span<const std::size_t>, std::size_t, bool);            \
  template Tensor<T> streamed_self_attention(const Tensor<T>&, std::span<const std::size_t>, std::size_t);

BTF_INSTANTIATE(float)
BTF_INSTANTIATE(double)

#undef BTF_INSTANTIATE

}  // namespace btf::numeric
