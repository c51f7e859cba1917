#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "btf/numeric/tensor.hpp"

namespace btf::models {

enum class Arch { rnn, transformer };

std::string arch_name(Arch arch);
Arch parse_arch(const std::string& name);

struct EncoderConfig {
  Arch arch = Arch::transformer;
  std::size_t d = 32;
  std::size_t h = 64;
  std::size_t L = 2;
  std::size_t J = 2;            // attention heads, Transformer only
  std::size_t vx = 1000;        // wording table rows
  std::size_t va = 255;         // amount table rows
  std::size_t vd = 35;          // date table rows
  double dropout = 0.1;
  double ln_eps = 1e-5;
  bool rnn_attention = true;    // final parameter-free attention pass

  // d=768, h=3072, L=2 (rnn) or 12 (transformer), J=12, nominal tables 7000/2500/30.
  static EncoderConfig paper(Arch arch);
  static EncoderConfig desk(Arch arch);
  // Throws ConfigError: h > d, d % J == 0 for the Transformer, eps > 0, tables non-empty.
  void validate() const;

  std::string to_json() const;
  static EncoderConfig from_json(const std::string& text);
  bool operator==(const EncoderConfig&) const = default;
};

// Closed forms.
std::uint64_t p_emb(std::uint64_t d, std::uint64_t vx, std::uint64_t va, std::uint64_t vd);
std::uint64_t p_rnn(std::uint64_t d, std::uint64_t h, std::uint64_t L);
std::uint64_t p_tf(std::uint64_t d, std::uint64_t h, std::uint64_t L);

struct ParamSpec {
  std::string name;
  numeric::Shape shape;
};

// Every trainable array of embedding + encoder, in a fixed order. Pre-training
// and downstream heads are not included.
std::vector<ParamSpec> param_manifest(const EncoderConfig& config);

struct ParamCount {
  std::uint64_t embedding = 0;
  std::uint64_t encoder = 0;
  std::uint64_t total = 0;
  std::vector<std::pair<std::string, std::uint64_t>> components;  // grouped by name prefix
};

// Introspects the manifest; no storage is allocated.
ParamCount count_params(const EncoderConfig& config);
// Closed-form counterpart of count_params().
ParamCount formula_params(const EncoderConfig& config);

// "92M"-style rendering: nearest whole million below 1e9.
std::string display_millions(std::uint64_t count);

}  // namespace btf::models
