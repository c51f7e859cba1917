#include "btf/models/transformer.hpp"

#include <cmath>

#include "btf/common/error.hpp"
#include "btf/numeric/ops.hpp"

namespace btf::models {

template <typename T>
EncoderOutput<T> TransformerEncoderState<T>::encode(const EncoderConfig& config,
                                                    const numeric::Tensor<T>& e0,
                                                    const EncoderInput& in,
                                                    const ForwardContext& ctx) const {
  using namespace numeric;
  if (e0.rows() != in.rows() || e0.cols() != config.d) {
    throw ShapeError("transformer_encode: embedding " + shape_str(e0.shape()) +
                     " does not match batch of " + std::to_string(in.rows()) + " rows, d=" +
                     std::to_string(config.d));
  }
  auto drop = [&](const Tensor<T>& t) {
    if (!ctx.train || config.dropout <= 0.0) return t;
    if (ctx.rng == nullptr) throw ConfigError("training forward pass without an rng");
    return dropout(t, config.dropout, true, *ctx.rng);
  };
  const std::size_t d = config.d, heads = config.J, dh = d / heads, n = in.stride;
  const T inv = T(1) / std::sqrt(static_cast<T>(dh));
  const T eps = static_cast<T>(config.ln_eps);
  std::vector<std::vector<bool>> key_masks(in.batch);
  for (std::size_t b = 0; b < in.batch; ++b) key_masks[b] = in.key_mask(b);

  Tensor<T> x = drop(e0);
  for (const auto& p : layers) {
    auto q = add_bias(matmul(x, p.wq), p.bq);
    auto k = add_bias(matmul(x, p.wk), p.bk);
    auto v = add_bias(matmul(x, p.wv), p.bv);
    std::vector<Tensor<T>> per_seq;
    per_seq.reserve(in.batch);
    for (std::size_t b = 0; b < in.batch; ++b) {
      auto qb = slice(q, 0, b * n, (b + 1) * n);
      auto kb = slice(k, 0, b * n, (b + 1) * n);
      auto vb = slice(v, 0, b * n, (b + 1) * n);
      // All heads' probabilities first (the set a training tape keeps), then contexts.
      std::vector<Tensor<T>> probs;
      probs.reserve(heads);
      for (std::size_t j = 0; j < heads; ++j) {
        auto qh = slice(qb, 1, j * dh, (j + 1) * dh);
        auto kh = slice(kb, 1, j * dh, (j + 1) * dh);
        probs.push_back(masked_softmax(scale(matmul(qh, kh, false, true), inv), key_masks[b]));
      }
      std::vector<Tensor<T>> per_head;
      per_head.reserve(heads);
      for (std::size_t j = 0; j < heads; ++j) {
        per_head.push_back(matmul(probs[j], slice(vb, 1, j * dh, (j + 1) * dh)));
      }
      probs.clear();
      per_seq.push_back(heads == 1 ? per_head[0] : concat(per_head, 1));
    }
    auto ctx_rows = in.batch == 1 ? per_seq[0] : concat(per_seq, 0);
    auto attn = add_bias(matmul(ctx_rows, p.wo), p.bo);
    x = layer_norm(add(x, drop(attn)), p.ln1_g, p.ln1_b, eps);
    auto ff = add_bias(matmul(gelu(add_bias(matmul(x, p.w1), p.b1)), p.w2), p.b2);
    x = layer_norm(add(x, drop(ff)), p.ln2_g, p.ln2_b, eps);
  }
  EncoderOutput<T> out;
  out.hidden = x;
  std::vector<std::size_t> bos(in.batch);
  for (std::size_t b = 0; b < in.batch; ++b) bos[b] = in.bos_row(b);
  out.cls = gather_rows(x, bos);
  return out;
}

template struct TransformerEncoderState<float>;
template struct TransformerEncoderState<double>;

}  // namespace btf::models
