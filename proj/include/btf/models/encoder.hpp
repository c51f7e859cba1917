#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "btf/models/config.hpp"
#include "btf/models/rnn.hpp"
#include "btf/models/transformer.hpp"

namespace btf::models {

// Embedding plus one encoder stack, with parameters allocated from
// param_manifest() and bound by name.
template <typename T>
class Encoder {
 public:
  // Xavier-uniform matrices and tables, zero biases, unit layer-norm gains,
  // forget-gate input bias +1, zero mixing scalars.
  Encoder(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const noexcept { return config_; }
  numeric::ParamList<T>& params() noexcept { return params_; }
  const numeric::ParamList<T>& params() const noexcept { return params_; }
  numeric::Tensor<T>& param(const std::string& name);
  std::size_t parameter_count() const { return numeric::element_count(params_); }

  numeric::Tensor<T> embed(const EncoderInput& in) const { return embedding_.embed(in); }
  EncoderOutput<T> encode(const numeric::Tensor<T>& e0, const EncoderInput& in,
                          const ForwardContext& ctx = {}) const;
  EncoderOutput<T> forward(const EncoderInput& in, const ForwardContext& ctx = {}) const {
    return encode(embed(in), in, ctx);
  }

  void set_trainable(bool on);

  // Directory with config.json and encoder.ckpt.
  void save(const std::filesystem::path& dir) const;
  static Encoder load(const std::filesystem::path& dir);

 private:
  void bind();

  EncoderConfig config_;
  numeric::ParamList<T> params_;
  MultimodalEmbedding<T> embedding_;
  RnnEncoderState<T> rnn_;
  TransformerEncoderState<T> transformer_;
};

// Xavier-uniform fill of a 2-D tensor.
template <typename T>
void xavier_uniform(numeric::Tensor<T>& w, Rng& rng);

extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace btf::models
