#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "btf/common/rng.hpp"
#include "btf/numeric/tensor.hpp"

// Differentiable operations. Unless noted, 2-D means "rows x cols" where all
// leading axes fold into rows, and shape mismatches throw ShapeError naming both
// shapes.
namespace btf::numeric {

// op(a) . op(b) on 2-D operands; transposes are applied to the stored layout.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
// a + bias broadcast over rows; bias has a.cols() entries.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
// Sum of all elements as a one-element tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& a);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t end);
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// Row lookup: out[n] = table[ids[n]]. Out-of-range ids throw LookupError
// mentioning `stream`.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const int> ids, std::string_view stream = "ids");
// Row gather on activations: out[n] = a[rows[n]].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::span<const std::size_t> rows);
// Mean of row ranges [first, second) -> one row per span.
template <typename T>
Tensor<T> segment_mean(const Tensor<T>& a, std::span<const std::pair<std::size_t, std::size_t>> spans);

template <typename T>
Tensor<T> softmax(const Tensor<T>& a);  // over the last axis
// Softmax over the last axis where keys with key_mask[j] == false get weight 0.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, const std::vector<bool>& key_mask);
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps);
template <typename T>
Tensor<T> gelu(const Tensor<T>& a);  // exact, erf-based
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> tanh(const Tensor<T>& a);
// Inverted dropout; identity when !train or p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double p, bool train, Rng& rng);

// Mean of -log softmax(logits[r])[targets[r]] over rows with mask[r]; exactly
// 0 (with zero gradient) when the mask selects nothing.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets,
                        const std::vector<bool>& mask);

// sum_k weights[k] * parts[k]; weights is a K-element tensor.
template <typename T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& parts, const Tensor<T>& weights);

// One direction of an LSTM with projection over a batch laid out as rows
// b * stride + t. gx holds the input-side gate pre-activations [rows, 4h] in
// gate order i, f, g, o; w_rec is [d, 4h]; proj is [h, d]. The recurrent input
// is the projected output of the previous step. Sequence b runs over its first
// lengths[b] rows only (reversed when `reverse`); other rows of the output are 0.
template <typename T>
Tensor<T> lstm_recurrence(const Tensor<T>& gx, const Tensor<T>& w_rec, const Tensor<T>& proj,
                          std::span<const std::size_t> lengths, std::size_t stride, bool reverse);

// Parameter-free scaled dot-product self-attention (Q = K = V = x) per
// sequence, same layout as lstm_recurrence. Scores are produced one query row
// at a time, so memory beyond input and output is O(stride).
template <typename T>
Tensor<T> streamed_self_attention(const Tensor<T>& x, std::span<const std::size_t> lengths,
                                  std::size_t stride);

}  // namespace btf::numeric
