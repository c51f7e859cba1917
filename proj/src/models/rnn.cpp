#include "btf/models/rnn.hpp"

#include "btf/common/error.hpp"
#include "btf/numeric/ops.hpp"

namespace btf::models {

namespace {

template <typename T>
numeric::Tensor<T> maybe_dropout(const numeric::Tensor<T>& x, const EncoderConfig& c, const ForwardContext& ctx) {
  if (!ctx.train || c.dropout <= 0.0) return x;
  if (ctx.rng == nullptr) throw ConfigError("training forward pass without an rng");
  return numeric::dropout(x, c.dropout, true, *ctx.rng);
}

}  // namespace

template <typename T>
EncoderOutput<T> RnnEncoderState<T>::encode(const EncoderConfig& config, const numeric::Tensor<T>& e0,
                                            const EncoderInput& in, const ForwardContext& ctx) const {
  using namespace numeric;
  if (e0.rows() != in.rows() || e0.cols() != config.d) {
    throw ShapeError("rnn_encode: embedding " + shape_str(e0.shape()) + " does not match batch of " +
                     std::to_string(in.rows()) + " rows, d=" + std::to_string(config.d));
  }
  std::vector<Tensor<T>> reps{e0};
  Tensor<T> input = maybe_dropout(e0, config, ctx);
  const T eps = static_cast<T>(config.ln_eps);
  for (const auto& layer : layers) {
    Tensor<T> sum_dirs;
    for (std::size_t dir = 0; dir < 2; ++dir) {
      const auto& p = layer[dir];
      auto gx = add_bias(add_bias(matmul(input, p.wx), p.bx), p.br);
      auto y = lstm_recurrence(gx, p.wr, p.proj, in.lengths, in.stride, dir == 1);
      auto normed = layer_norm(y, p.ln_g, p.ln_b, eps);
      sum_dirs = dir == 0 ? normed : add(sum_dirs, normed);
    }
    reps.push_back(sum_dirs);
    input = maybe_dropout(sum_dirs, config, ctx);
  }
  auto weights = reshape(softmax(reshape(mix, Shape{1, mix.numel()})), Shape{mix.numel()});
  auto mixed = weighted_sum(reps, weights);
  EncoderOutput<T> out;
  out.hidden = config.rnn_attention ? add(mixed, streamed_self_attention(mixed, in.lengths, in.stride)) : mixed;
  std::vector<std::size_t> bos(in.batch), eos(in.batch);
  for (std::size_t b = 0; b < in.batch; ++b) {
    bos[b] = in.bos_row(b);
    eos[b] = in.eos_row(b);
  }
  out.cls = add(gather_rows(out.hidden, bos), gather_rows(out.hidden, eos));
  return out;
}

template struct RnnEncoderState<float>;
template struct RnnEncoderState<double>;

}  // namespace btf::models
