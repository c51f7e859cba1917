#include "btf/models/encoder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "btf/common/error.hpp"
#include "btf/numeric/checkpoint.hpp"

namespace btf::models {

template <typename T>
void xavier_uniform(numeric::Tensor<T>& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.dim(0) + w.dim(1)));
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  for (const auto& spec : param_manifest(config_)) {
    numeric::Tensor<T> t(spec.shape);
    const auto& name = spec.name;
    auto ends_with = [&](std::string_view s) {
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (spec.shape.size() == 2) {
      xavier_uniform(t, rng);
    } else if (ends_with("_g")) {
      for (auto& v : t.values()) v = T(1);
    } else if (ends_with(".bx")) {
      const std::size_t h = config_.h;
      for (std::size_t j = h; j < 2 * h; ++j) t[j] = T(1);
    }
    t.set_requires_grad(true);
    params_.push_back({name, t});
  }
  bind();
}

template <typename T>
numeric::Tensor<T>& Encoder<T>::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw LookupError("encoder has no parameter '" + name + "'");
}

template <typename T>
void Encoder<T>::bind() {
  embedding_ = {param("emb.x"), param("emb.a"), param("emb.d"), param("emb.t")};
  rnn_ = {};
  transformer_ = {};
  for (std::size_t l = 0; l < config_.L; ++l) {
    const std::string layer = std::to_string(l);
    if (config_.arch == Arch::rnn) {
      std::array<typename RnnEncoderState<T>::Direction, 2> dirs;
      for (std::size_t k = 0; k < 2; ++k) {
        const std::string p = "rnn.l" + layer + (k == 0 ? ".fwd." : ".bwd.");
        dirs[k] = {param(p + "wx"), param(p + "wr"), param(p + "bx"), param(p + "br"),
                   param(p + "proj"), param(p + "ln_g"), param(p + "ln_b")};
      }
      rnn_.layers.push_back(dirs);
    } else {
      const std::string p = "tf.l" + layer + ".";
      transformer_.layers.push_back({param(p + "wq"), param(p + "bq"), param(p + "wk"), param(p + "bk"),
                                     param(p + "wv"), param(p + "bv"), param(p + "wo"), param(p + "bo"),
                                     param(p + "w1"), param(p + "b1"), param(p + "w2"), param(p + "b2"),
                                     param(p + "ln1_g"), param(p + "ln1_b"), param(p + "ln2_g"),
                                     param(p + "ln2_b")});
    }
  }
  if (config_.arch == Arch::rnn) rnn_.mix = param("rnn.mix");
}

template <typename T>
EncoderOutput<T> Encoder<T>::encode(const numeric::Tensor<T>& e0, const EncoderInput& in,
                                    const ForwardContext& ctx) const {
  return config_.arch == Arch::rnn ? rnn_.encode(config_, e0, in, ctx)
                                   : transformer_.encode(config_, e0, in, ctx);
}

template <typename T>
void Encoder<T>::set_trainable(bool on) {
  for (auto& p : params_) {
    p.tensor.set_requires_grad(on);
    if (!on) p.tensor.clear_grad();
  }
}

template <typename T>
void Encoder<T>::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
  std::ofstream os(dir / "config.json", std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + (dir / "config.json").string() + "'");
  os << config_.to_json();
  numeric::save_checkpoint(params_, dir / "encoder.ckpt");
}

template <typename T>
Encoder<T> Encoder<T>::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "config.json", std::ios::binary);
  if (!is) throw IoError("cannot read '" + (dir / "config.json").string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  Encoder enc(EncoderConfig::from_json(ss.str()), 0);
  numeric::load_checkpoint(enc.params_, dir / "encoder.ckpt");
  return enc;
}

template void xavier_uniform(numeric::Tensor<float>&, Rng&);
template void xavier_uniform(numeric::Tensor<double>&, Rng&);
template class Encoder<float>;
template class Encoder<double>;

}  // namespace btf::models
