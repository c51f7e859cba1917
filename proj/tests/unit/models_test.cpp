#include <cmath>
#include <filesystem>
#include <limits>

#include <gtest/gtest.h>

#include "../support/encoder_check.hpp"
#include "btf/common/error.hpp"
#include "btf/models/config.hpp"
#include "btf/models/encoder.hpp"
#include "btf/models/head.hpp"

using namespace btf;
using namespace btf::models;
using btf::testing::encoder_grad_check;
using btf::testing::random_input;

namespace {

EncoderConfig tiny(Arch arch) {
  EncoderConfig c = EncoderConfig::desk(arch);
  c.d = 8;
  c.h = 16;
  c.L = 2;
  c.J = 2;
  c.vx = 24;
  c.va = 17;
  c.vd = 35;
  return c;
}

std::vector<std::size_t> true_rows(const EncoderInput& in) {
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < in.batch; ++b)
    for (std::size_t p = 0; p < in.lengths[b]; ++p) rows.push_back(b * in.stride + p);
  return rows;
}

}  // namespace

TEST(ParamCount, FullScaleConfigs) {
  EXPECT_EQ(p_emb(768, 7000, 2500, 30), 7320576u);
  EXPECT_EQ(p_rnn(768, 3072, 2), 85039107u);
  EXPECT_EQ(p_tf(768, 3072, 12), 85054464u);
  auto rnn = count_params(EncoderConfig::paper(Arch::rnn));
  auto tf = count_params(EncoderConfig::paper(Arch::transformer));
  EXPECT_EQ(rnn.total, 92359683u);
  EXPECT_EQ(tf.total, 92375040u);
  EXPECT_EQ(rnn.embedding, 7320576u);
  EXPECT_EQ(display_millions(rnn.total), "92M");
  EXPECT_EQ(display_millions(tf.total), "92M");
  EXPECT_EQ(formula_params(EncoderConfig::paper(Arch::rnn)).total, rnn.total);
  EXPECT_EQ(formula_params(EncoderConfig::paper(Arch::transformer)).total, tf.total);
}

TEST(ParamCount, DeskConfigAndBreakdown) {
  for (Arch arch : {Arch::rnn, Arch::transformer}) {
    auto c = EncoderConfig::desk(arch);
    c.vx = 1000;
    c.va = 255;
    c.vd = 30;
    auto got = count_params(c);
    auto want = formula_params(c);
    EXPECT_EQ(got.total, want.total);
    EXPECT_EQ(got.embedding, want.embedding);
    EXPECT_EQ(got.encoder, want.encoder);
    std::uint64_t sum = 0;
    for (const auto& [name, n] : got.components) sum += n;
    EXPECT_EQ(sum, got.total);
    Encoder<float> enc(c, 1);
    EXPECT_EQ(enc.parameter_count(), got.total);
  }
}

TEST(ParamCount, RandomConfigsMatchFormula) {
  Rng rng(77);
  for (int i = 0; i < 40; ++i) {
    EncoderConfig c;
    c.arch = i % 2 ? Arch::rnn : Arch::transformer;
    c.J = 1 + rng.below(4);
    c.d = c.J * (1 + rng.below(16));
    c.h = c.d + 1 + rng.below(100);
    c.L = 1 + rng.below(6);
    c.vx = 1 + rng.below(5000);
    c.va = 1 + rng.below(3000);
    c.vd = 1 + rng.below(40);
    EXPECT_EQ(count_params(c).total, formula_params(c).total) << c.to_json();
  }
}

TEST(Config, ValidateAndJson) {
  auto c = EncoderConfig::desk(Arch::transformer);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(EncoderConfig::from_json(c.to_json()), c);
  auto bad = c;
  bad.h = bad.d;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.J = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.ln_eps = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.arch = Arch::rnn;
  bad.ln_eps = 1e-5;
  bad.J = 5;
  EXPECT_NO_THROW(bad.validate());
  EXPECT_THROW(parse_arch("cnn"), ConfigError);
  EXPECT_EQ(parse_arch("rnn"), Arch::rnn);
}

TEST(Embedding, AdditiveDecomposition) {
  auto c = tiny(Arch::transformer);
  Encoder<double> enc(c, 3);
  Rng rng(1);
  std::vector<std::size_t> lens = {7};
  auto in = random_input(c, lens, rng);
  auto full = enc.embed(in);
  for (const char* name : {"emb.a", "emb.d", "emb.t"})
    for (auto& v : enc.param(name).values()) v = 0.0;
  auto only_x = enc.embed(in);
  const auto& x = enc.param("emb.x");
  for (std::size_t p = 0; p < 7; ++p)
    for (std::size_t k = 0; k < c.d; ++k) EXPECT_EQ(only_x[p * c.d + k], x[in.x_ids[p] * c.d + k]);
  // Within one event span the A+D+T part is shared.
  Encoder<double> fresh(c, 3);
  auto e = fresh.embed(in);
  const auto& xf = fresh.param("emb.x");
  for (std::size_t p = 2; p + 1 < 7; ++p) {
    if (in.a_ids[p] != in.a_ids[p - 1] || in.d_ids[p] != in.d_ids[p - 1] || in.t_ids[p] != in.t_ids[p - 1]) continue;
    for (std::size_t k = 0; k < c.d; ++k) {
      const double bias_p = e[p * c.d + k] - xf[in.x_ids[p] * c.d + k];
      const double bias_q = e[(p - 1) * c.d + k] - xf[in.x_ids[p - 1] * c.d + k];
      EXPECT_NEAR(bias_p, bias_q, 1e-14);
    }
  }
  (void)full;
  auto bad = in;
  bad.a_ids[1] = static_cast<int>(c.va);
  try {
    enc.embed(bad);
    FAIL();
  } catch (const LookupError& err) {
    EXPECT_NE(std::string(err.what()).find("amount"), std::string::npos) << err.what();
  }
}

TEST(Rnn, IdentityConfiguration) {
  auto c = tiny(Arch::rnn);
  c.rnn_attention = false;
  Encoder<double> enc(c, 5);
  auto& mix = enc.param("rnn.mix");
  mix[0] = 0.0;
  for (std::size_t l = 1; l < mix.numel(); ++l) mix[l] = -std::numeric_limits<double>::infinity();
  Rng rng(2);
  std::vector<std::size_t> lens = {1};
  auto in = random_input(c, lens, rng, false);
  auto e0 = enc.embed(in);
  auto out = enc.forward(in);
  for (std::size_t k = 0; k < c.d; ++k) EXPECT_EQ(out.hidden[k], e0[k]);
}

TEST(Rnn, ReversalSymmetryWithTiedDirections) {
  auto c = tiny(Arch::rnn);
  Encoder<double> enc(c, 6);
  for (std::size_t l = 0; l < c.L; ++l) {
    const std::string p = "rnn.l" + std::to_string(l) + ".";
    for (const char* w : {"wx", "wr", "bx", "br", "proj", "ln_g", "ln_b"}) {
      auto src = enc.param(p + "fwd." + w);
      auto dst = enc.param(p + "bwd." + w);
      for (std::size_t i = 0; i < src.numel(); ++i) dst[i] = src[i];
    }
  }
  Rng rng(3);
  std::vector<std::size_t> lens = {9};
  auto in = random_input(c, lens, rng, false);
  auto rev = in;
  std::reverse(rev.x_ids.begin(), rev.x_ids.end());
  std::reverse(rev.a_ids.begin(), rev.a_ids.end());
  std::reverse(rev.d_ids.begin(), rev.d_ids.end());
  auto a = enc.forward(in);
  auto b = enc.forward(rev);
  for (std::size_t k = 0; k < c.d; ++k) EXPECT_NEAR(a.cls[k], b.cls[k], 1e-12);
  for (std::size_t p = 0; p < 9; ++p)
    for (std::size_t k = 0; k < c.d; ++k) EXPECT_NEAR(a.hidden[p * c.d + k], b.hidden[(8 - p) * c.d + k], 1e-12);
}

TEST(Transformer, EventPermutationEquivariance) {
  auto c = tiny(Arch::transformer);
  Encoder<double> enc(c, 7);
  // [BOS] e0(2) e1(1) e2(3) [EOS]
  EncoderInput in;
  in.batch = 1;
  in.stride = 8;
  in.lengths = {8};
  in.x_ids = {1, 9, 10, 11, 12, 13, 14, 2};
  in.a_ids = {13, 3, 3, 7, 5, 5, 5, 14};
  in.d_ids = {31, 4, 4, 9, 20, 20, 20, 32};
  in.t_ids = {0, 0, 0, 0, 0, 0, 0, 0};
  in.mask.assign(8, true);
  // Event order e2, e0, e1.
  const std::vector<std::size_t> perm = {0, 4, 5, 6, 1, 2, 3, 7};
  EncoderInput q = in;
  for (std::size_t i = 0; i < 8; ++i) {
    q.x_ids[i] = in.x_ids[perm[i]];
    q.a_ids[i] = in.a_ids[perm[i]];
    q.d_ids[i] = in.d_ids[perm[i]];
  }
  auto a = enc.forward(in);
  auto b = enc.forward(q);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t k = 0; k < c.d; ++k) EXPECT_NEAR(b.hidden[i * c.d + k], a.hidden[perm[i] * c.d + k], 1e-12);
  for (std::size_t k = 0; k < c.d; ++k) EXPECT_NEAR(a.cls[k], b.cls[k], 1e-12);
}

TEST(Encoders, PadContentsDoNotLeak) {
  for (Arch arch : {Arch::rnn, Arch::transformer}) {
    auto c = tiny(arch);
    Encoder<double> enc(c, 8);
    Rng rng(4);
    std::vector<std::size_t> lens = {10, 6};
    auto in = random_input(c, lens, rng);
    auto a = enc.forward(in);
    auto in2 = in;
    for (std::size_t p = 6; p < 10; ++p) {
      in2.x_ids[10 + p] = 9;
      in2.a_ids[10 + p] = 2;
      in2.d_ids[10 + p] = 5;
      in2.t_ids[10 + p] = 1;
    }
    auto b = enc.forward(in2);
    for (auto r : true_rows(in))
      for (std::size_t k = 0; k < c.d; ++k) ASSERT_EQ(a.hidden[r * c.d + k], b.hidden[r * c.d + k]) << arch_name(arch);
    for (std::size_t i = 0; i < a.cls.numel(); ++i) ASSERT_EQ(a.cls[i], b.cls[i]);
    // The short sequence alone gives the same values as inside the batch.
    EncoderInput one;
    one.batch = 1;
    one.stride = 6;
    one.lengths = {6};
    one.x_ids.assign(in.x_ids.begin() + 10, in.x_ids.begin() + 16);
    one.a_ids.assign(in.a_ids.begin() + 10, in.a_ids.begin() + 16);
    one.d_ids.assign(in.d_ids.begin() + 10, in.d_ids.begin() + 16);
    one.t_ids.assign(in.t_ids.begin() + 10, in.t_ids.begin() + 16);
    one.mask.assign(6, true);
    auto s = enc.forward(one);
    for (std::size_t p = 0; p < 6; ++p)
      for (std::size_t k = 0; k < c.d; ++k) EXPECT_NEAR(s.hidden[p * c.d + k], a.hidden[(10 + p) * c.d + k], 1e-12);
  }
}

TEST(Encoders, EveryParameterGetsGradient) {
  for (Arch arch : {Arch::rnn, Arch::transformer}) {
    auto c = tiny(arch);
    Encoder<double> enc(c, 9);
    Rng rng(5);
    std::vector<std::size_t> lens = {12, 9, 5};
    auto in = random_input(c, lens, rng);
    for (auto& p : enc.params()) p.tensor.clear_grad();
    numeric::Tape<double> tape;
    auto rows = true_rows(in);
    auto out = enc.forward(in);
    auto loss = numeric::add(btf::testing::project(numeric::gather_rows(out.hidden, std::span<const std::size_t>(rows)), 1),
                             btf::testing::project(out.cls, 2));
    tape.backward(loss);
    for (auto& p : enc.params()) {
      bool nonzero = false;
      for (double g : p.tensor.grad()) nonzero |= g != 0.0;
      EXPECT_TRUE(nonzero) << arch_name(arch) << " " << p.name;
    }
  }
}

TEST(Encoders, FiniteDifferenceFullModels) {
  for (Arch arch : {Arch::rnn, Arch::transformer}) {
    auto c = tiny(arch);
    c.dropout = 0.0;
    Encoder<double> enc(c, 10);
    // Non-trivial mixing weights and layer-norm parameters.
    Rng rng(6);
    for (auto& p : enc.params()) {
      if (p.name.find("ln") != std::string::npos || p.name.find(".b") != std::string::npos || p.name == "rnn.mix") {
        for (auto& v : p.tensor.values()) v += 0.1 * rng.normal();
      }
    }
    std::vector<std::size_t> lens = {12, 7};
    auto in = random_input(c, lens, rng);
    auto rep = encoder_grad_check(enc, in);
    EXPECT_LE(rep.max_rel_error, 1e-4) << arch_name(arch) << " " << rep.worst;
  }
}

TEST(Encoders, DropoutOnlyInTraining) {
  auto c = tiny(Arch::transformer);
  c.dropout = 0.5;
  Encoder<double> enc(c, 11);
  Rng rng(7);
  std::vector<std::size_t> lens = {6};
  auto in = random_input(c, lens, rng);
  auto a = enc.forward(in);
  auto b = enc.forward(in);
  for (std::size_t i = 0; i < a.hidden.numel(); ++i) EXPECT_EQ(a.hidden[i], b.hidden[i]);
  Rng drop(1);
  auto t = enc.forward(in, ForwardContext{true, &drop});
  bool differs = false;
  for (std::size_t i = 0; i < a.hidden.numel(); ++i) differs |= a.hidden[i] != t.hidden[i];
  EXPECT_TRUE(differs);
}

TEST(Encoders, SaveLoadRoundTrip) {
  for (Arch arch : {Arch::rnn, Arch::transformer}) {
    auto c = tiny(arch);
    Encoder<float> enc(c, 12);
    auto dir = std::filesystem::temp_directory_path() / ("btf_enc_" + arch_name(arch));
    enc.save(dir);
    auto back = Encoder<float>::load(dir);
    EXPECT_EQ(back.config(), c);
    ASSERT_EQ(back.params().size(), enc.params().size());
    for (std::size_t i = 0; i < enc.params().size(); ++i) {
      EXPECT_EQ(back.params()[i].name, enc.params()[i].name);
      for (std::size_t k = 0; k < enc.params()[i].tensor.numel(); ++k)
        ASSERT_EQ(back.params()[i].tensor[k], enc.params()[i].tensor[k]);
    }
  }
}

TEST(Encoders, InitialisationRules) {
  auto c = tiny(Arch::rnn);
  Encoder<double> enc(c, 13);
  const auto& bx = enc.param("rnn.l0.fwd.bx");
  for (std::size_t j = 0; j < 4 * c.h; ++j) EXPECT_EQ(bx[j], (j >= c.h && j < 2 * c.h) ? 1.0 : 0.0);
  for (double v : enc.param("rnn.l1.bwd.ln_g").values()) EXPECT_EQ(v, 1.0);
  for (double v : enc.param("rnn.mix").values()) EXPECT_EQ(v, 0.0);
  const double bound = std::sqrt(6.0 / double(c.d + 4 * c.h));
  for (double v : enc.param("rnn.l0.fwd.wx").values()) EXPECT_LE(std::abs(v), bound);
}

TEST(Head, LinearAndArgmax) {
  Rng rng(8);
  auto head = LinearHead<double>::create(4, 3, rng);
  EXPECT_EQ(head.outputs(), 3u);
  numeric::Tensor<double> x({2, 4}, 1.0);
  auto y = head(x);
  EXPECT_EQ(y.shape(), (numeric::Shape{2, 3}));
  numeric::Tensor<double> logits({2, 3}, std::vector<double>{0, 5, 1, 2, 2, -1});
  EXPECT_EQ(argmax_rows(logits), (std::vector<int>{1, 0}));
  numeric::ParamList<double> ps;
  head.append_params(ps, "cat");
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[0].name, "cat.w");
}
