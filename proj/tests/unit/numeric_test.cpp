#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "../support/gradcheck.hpp"
#include "btf/common/error.hpp"
#include "btf/numeric/alloc.hpp"
#include "btf/numeric/checkpoint.hpp"
#include "btf/numeric/ops.hpp"
#include "btf/numeric/optim.hpp"
#include "btf/numeric/parallel.hpp"

using namespace btf;
using namespace btf::numeric;
using btf::testing::grad_check;
using btf::testing::project;
using btf::testing::random_tensor;
using TD = Tensor<double>;

namespace {

constexpr double kTol = 1e-4;

void expect_grad_ok(const std::vector<TD>& in, const std::function<TD()>& f) {
  auto rep = grad_check(in, f);
  EXPECT_LE(rep.max_rel_error, kTol) << rep.worst;
  EXPECT_GT(rep.checked, 0u);
}

}  // namespace

TEST(Tensor, BasicsAndClone) {
  TD t({2, 3}, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  TD alias = t;
  alias[0] = 4.0;
  EXPECT_EQ(t[0], 4.0);
  TD c = t.clone();
  c[0] = 0.0;
  EXPECT_EQ(t[0], 4.0);
  EXPECT_FALSE(c.same_node(t));
  EXPECT_THROW(TD({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_EQ(TD::scalar(2.0).item(), 2.0);
  EXPECT_THROW(t.item(), ShapeError);
}

TEST(Ops, ShapeErrorsNameBothShapes) {
  TD a({2, 3}), b({2, 4});
  try {
    add(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    std::string w = e.what();
    EXPECT_NE(w.find("[2, 3]"), std::string::npos) << w;
    EXPECT_NE(w.find("[2, 4]"), std::string::npos) << w;
  }
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(mul(a, b), ShapeError);
  EXPECT_THROW(concat<double>({a, b}, 0), ShapeError);
  EXPECT_THROW(layer_norm(a, TD({2}), TD({3}), 1e-5), ShapeError);
}

TEST(Ops, MatmulValues) {
  TD a({2, 2}, std::vector<double>{1, 2, 3, 4});
  TD b({2, 2}, std::vector<double>{5, 6, 7, 8});
  auto c = matmul(a, b);
  EXPECT_EQ(c[0], 19);
  EXPECT_EQ(c[3], 50);
  auto ct = matmul(a, b, true, false);  // a^T b
  EXPECT_EQ(ct[0], 26);
  auto cbt = matmul(a, b, false, true);  // a b^T
  EXPECT_EQ(cbt[1], 23);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(1);
  auto x = random_tensor({7, 13}, rng, 5.0);
  auto s = softmax(x);
  for (std::size_t r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 13; ++c) sum += s[r * 13 + c];
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  std::vector<bool> mask = {true, false, true};
  TD y({2, 3}, std::vector<double>{1, 50, 2, 3, -50, 3});
  auto m = masked_softmax(y, mask);
  EXPECT_EQ(m[1], 0.0);
  EXPECT_EQ(m[4], 0.0);
  EXPECT_NEAR(m[3], 0.5, 1e-15);
}

TEST(Ops, LayerNormConstantVector) {
  TD x({2, 4}, 3.0);
  TD g({4}, std::vector<double>{1, 2, 3, 4});
  TD b({4}, std::vector<double>{0.5, -0.5, 0.25, 0});
  auto y = layer_norm(x, g, b, 1e-5);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(y[r * 4 + c], b[c]);
}

TEST(Ops, DropoutIdentityWhenNotTraining) {
  Rng rng(3);
  auto x = random_tensor({5, 5}, rng);
  auto y = dropout(x, 0.5, false, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
  auto z = dropout(x, 0.0, true, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(z[i], x[i]);
  auto w = dropout(x, 0.5, true, rng);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (w[i] == 0.0) ++zeros;
    else EXPECT_NEAR(w[i], 2.0 * x[i], 1e-15);
  }
  EXPECT_GT(zeros, 0u);
}

TEST(Ops, CrossEntropyMaskedMean) {
  TD logits({2, 3}, std::vector<double>{0, 0, 0, 1, 2, 3});
  std::vector<int> t = {1, 2};
  auto ce = cross_entropy(logits, std::span<const int>(t), {true, true});
  const double want = 0.5 * (std::log(3.0) + (std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0));
  EXPECT_NEAR(ce.item(), want, 1e-14);
  auto one = cross_entropy(logits, std::span<const int>(t), {false, true});
  EXPECT_NEAR(one.item(), std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0, 1e-14);
}

TEST(Ops, CrossEntropyEmptyMaskIsZero) {
  Rng rng(4);
  auto logits = random_tensor({3, 4}, rng);
  std::vector<int> t = {0, 1, 2};
  Tape<double> tape;
  auto ce = cross_entropy(logits, std::span<const int>(t), {false, false, false});
  EXPECT_EQ(ce.item(), 0.0);
  auto other = sum(logits);
  auto total = add(ce, other);
  tape.backward(total);
  for (double g : logits.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Ops, EmbeddingLookupError) {
  TD table({4, 2});
  std::vector<int> ids = {0, 4};
  try {
    embedding(table, std::span<const int>(ids), "amount");
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find("amount"), std::string::npos);
  }
}

TEST(GradCheck, Matmul) {
  Rng rng(10);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
  expect_grad_ok({a, b}, [&] { return project(matmul(a, b), 1); });
  auto at = random_tensor({4, 3}, rng), bt = random_tensor({5, 4}, rng);
  expect_grad_ok({at, bt}, [&] { return project(matmul(at, bt, true, true), 2); });
  expect_grad_ok({a, bt}, [&] { return project(matmul(a, bt, false, true), 3); });
  expect_grad_ok({at, b}, [&] { return project(matmul(at, b, true, false), 4); });
}

TEST(GradCheck, Elementwise) {
  Rng rng(11);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), bias = random_tensor({4}, rng);
  expect_grad_ok({a, b}, [&] { return project(add(a, b), 1); });
  expect_grad_ok({a, b}, [&] { return project(mul(a, b), 2); });
  expect_grad_ok({a, bias}, [&] { return project(add_bias(a, bias), 3); });
  expect_grad_ok({a}, [&] { return project(scale(a, 0.37), 4); });
  expect_grad_ok({a}, [&] { return sum(mul(a, a)); });
  expect_grad_ok({a}, [&] { return project(gelu(a), 5); });
  expect_grad_ok({a}, [&] { return project(sigmoid(a), 6); });
  expect_grad_ok({a}, [&] { return project(tanh(a), 7); });
  // Same operand twice accumulates both paths.
  expect_grad_ok({a}, [&] { return project(add(a, a), 8); });
}

TEST(GradCheck, Structural) {
  Rng rng(12);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({2, 4}, rng), c = random_tensor({3, 2}, rng);
  expect_grad_ok({a, b}, [&] { return project(concat<double>({a, b}, 0), 1); });
  expect_grad_ok({a, c}, [&] { return project(concat<double>({a, c}, 1), 2); });
  expect_grad_ok({a}, [&] { return project(slice(a, 0, 1, 3), 3); });
  expect_grad_ok({a}, [&] { return project(slice(a, 1, 1, 3), 4); });
  expect_grad_ok({a}, [&] { return project(reshape(a, {4, 3}), 5); });
  std::vector<int> ids = {2, 0, 2, 1};
  auto table = random_tensor({3, 4}, rng);
  expect_grad_ok({table}, [&] { return project(embedding(table, std::span<const int>(ids)), 6); });
  std::vector<std::size_t> rows = {2, 2, 0};
  expect_grad_ok({a}, [&] { return project(gather_rows(a, std::span<const std::size_t>(rows)), 7); });
  std::vector<std::pair<std::size_t, std::size_t>> spans = {{0, 2}, {2, 3}, {1, 3}};
  expect_grad_ok({a}, [&] { return project(segment_mean(a, std::span<const std::pair<std::size_t, std::size_t>>(spans)), 8); });
  auto parts = std::vector<TD>{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
  auto w = random_tensor({3}, rng);
  expect_grad_ok({parts[0], parts[1], parts[2], w}, [&] { return project(weighted_sum(parts, w), 9); });
}

TEST(GradCheck, Normalization) {
  Rng rng(13);
  auto x = random_tensor({4, 6}, rng), g = random_tensor({6}, rng), b = random_tensor({6}, rng);
  expect_grad_ok({x}, [&] { return project(softmax(x), 1); });
  std::vector<bool> km = {true, true, false, true, false, true};
  expect_grad_ok({x}, [&] { return project(masked_softmax(x, km), 2); });
  expect_grad_ok({x, g, b}, [&] { return project(layer_norm(x, g, b, 1e-5), 3); });
}

TEST(GradCheck, CrossEntropyAndDropout) {
  Rng rng(14);
  auto logits = random_tensor({5, 7}, rng);
  std::vector<int> t = {0, 6, 3, 3, 1};
  std::vector<bool> m = {true, false, true, true, true};
  expect_grad_ok({logits}, [&] { return cross_entropy(logits, std::span<const int>(t), m); });
  auto x = random_tensor({4, 5}, rng);
  expect_grad_ok({x}, [&] {
    Rng r(99);  // same mask on every evaluation
    return project(dropout(x, 0.3, true, r), 2);
  });
}

TEST(GradCheck, LstmRecurrence) {
  Rng rng(15);
  const std::size_t d = 3, h = 4, stride = 5;
  std::vector<std::size_t> lengths = {5, 3};
  auto gx = random_tensor({2 * stride, 4 * h}, rng);
  auto wr = random_tensor({d, 4 * h}, rng, 0.5);
  auto proj = random_tensor({h, d}, rng, 0.5);
  for (bool rev : {false, true}) {
    expect_grad_ok({gx, wr, proj}, [&] {
      return project(lstm_recurrence(gx, wr, proj, std::span<const std::size_t>(lengths), stride, rev), 3);
    });
  }
}

TEST(Ops, LstmIgnoresPadRows) {
  Rng rng(16);
  const std::size_t d = 2, h = 3, stride = 4;
  std::vector<std::size_t> lengths = {2};
  auto gx = random_tensor({stride, 4 * h}, rng);
  auto wr = random_tensor({d, 4 * h}, rng);
  auto proj = random_tensor({h, d}, rng);
  for (bool rev : {false, true}) {
    auto out = lstm_recurrence(gx, wr, proj, std::span<const std::size_t>(lengths), stride, rev);
    auto gx2 = gx.clone();
    for (std::size_t i = 2 * 4 * h; i < gx2.numel(); ++i) gx2[i] = 100.0;
    auto out2 = lstm_recurrence(gx2, wr, proj, std::span<const std::size_t>(lengths), stride, rev);
    for (std::size_t i = 0; i < 2 * d; ++i) EXPECT_EQ(out[i], out2[i]);
    for (std::size_t i = 2 * d; i < out.numel(); ++i) EXPECT_EQ(out[i], 0.0);
  }
}

TEST(GradCheck, StreamedSelfAttention) {
  Rng rng(17);
  const std::size_t stride = 4;
  std::vector<std::size_t> lengths = {4, 2};
  auto x = random_tensor({2 * stride, 3}, rng);
  expect_grad_ok({x}, [&] {
    return project(streamed_self_attention(x, std::span<const std::size_t>(lengths), stride), 5);
  });
}

TEST(AdamW, ZeroGradientNoDecayUnchanged) {
  TD w({3}, std::vector<double>{1, -2, 3});
  w.set_requires_grad(true);
  w.grad_data();  // zero gradient buffer
  AdamW<double> opt({{"w", w}}, AdamWConfig{0.9, 0.999, 1e-8, 0.0});
  opt.step(0.1);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], -2.0);
  EXPECT_EQ(w[2], 3.0);
}

TEST(AdamW, FirstStepIsSignStep) {
  TD w({3}, std::vector<double>{0.5, 0.5, 0.5});
  w.set_requires_grad(true);
  double* g = w.grad_data();
  g[0] = 3.0;
  g[1] = -0.01;
  g[2] = 1e-3;
  AdamW<double> opt({{"w", w}}, AdamWConfig{0.9, 0.999, 1e-12, 0.0});
  opt.step(0.01);
  EXPECT_NEAR(w[0], 0.5 - 0.01, 1e-10);
  EXPECT_NEAR(w[1], 0.5 + 0.01, 1e-8);
  EXPECT_NEAR(w[2], 0.5 - 0.01, 1e-8);
}

TEST(AdamW, DescendsParabola) {
  TD w({1}, 1.0);
  w.set_requires_grad(true);
  AdamW<double> opt({{"w", w}}, AdamWConfig{});
  for (int i = 0; i < 3; ++i) {
    opt.zero_grad();
    Tape<double> tape;
    auto f = sum(mul(w, w));
    const double before = f.item();
    tape.backward(f);
    opt.step(0.05);
    EXPECT_LT(w[0] * w[0], before);
  }
  EXPECT_EQ(opt.steps(), 3u);
}

TEST(AdamW, DecoupledDecay) {
  TD w({1}, 2.0);
  w.set_requires_grad(true);
  w.grad_data();  // zero gradient buffer
  AdamW<double> opt({{"w", w}}, AdamWConfig{0.9, 0.999, 1e-8, 0.1});
  opt.step(0.5);
  EXPECT_NEAR(w[0], 2.0 - 0.5 * 0.1 * 2.0, 1e-12);
}

TEST(ClipGradNorm, RescalesAboveThreshold) {
  TD a({2}), b({1});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  a.grad_data()[0] = 3.0;
  a.grad_data()[1] = 0.0;
  b.grad_data()[0] = 4.0;
  ParamList<double> ps = {{"a", a}, {"b", b}};
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 10.0), 5.0);
  EXPECT_EQ(b.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
}

TEST(LrSchedule, Shape) {
  EXPECT_EQ(lr_schedule(0, 100, 1e-3, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(lr_schedule(10, 100, 1e-3, 0.1), 1e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(5, 100, 1e-3, 0.1), 5e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(55, 100, 1e-3, 0.1), 5e-4);
  EXPECT_EQ(lr_schedule(100, 100, 1e-3, 0.1), 0.0);
  double prev = 1.0;
  for (std::size_t s = 10; s <= 100; ++s) {
    const double lr = lr_schedule(s, 100, 1e-3, 0.1);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Checkpoint, RoundTripAndCorruption) {
  Rng rng(20);
  ParamList<float> ps = {{"a.w", Tensor<float>({3, 2})}, {"b", Tensor<float>({4})}};
  for (auto& p : ps)
    for (auto& v : p.tensor.values()) v = static_cast<float>(rng.normal());
  auto bytes = encode_checkpoint(ps);
  auto recs = decode_checkpoint(bytes);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].name, "a.w");
  EXPECT_EQ(recs[0].shape, (Shape{3, 2}));
  EXPECT_EQ(recs[0].dtype, 4);
  EXPECT_EQ(static_cast<float>(recs[1].values[2]), ps[1].tensor[2]);
  EXPECT_EQ(bytes.substr(0, 8), std::string("BTFCKPT\0", 8));

  ParamList<float> other = {{"a.w", Tensor<float>({3, 2})}, {"b", Tensor<float>({4})}};
  assign_records(other, recs);
  EXPECT_EQ(encode_checkpoint(other), bytes);

  auto bad = bytes;
  bad[20] ^= 1;
  EXPECT_THROW(decode_checkpoint(bad), ParseError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 10)), ParseError);
  ParamList<float> wrong = {{"a.w", Tensor<float>({2, 3})}, {"b", Tensor<float>({4})}};
  EXPECT_THROW(assign_records(wrong, recs), ShapeError);
  ParamList<float> missing = {{"c", Tensor<float>({4})}};
  EXPECT_THROW(assign_records(missing, recs), LookupError);

  auto path = std::filesystem::temp_directory_path() / "btf_ckpt_test.ckpt";
  save_checkpoint(ps, path);
  ParamList<float> loaded = {{"a.w", Tensor<float>({3, 2})}, {"b", Tensor<float>({4})}};
  load_checkpoint(loaded, path);
  EXPECT_EQ(encode_checkpoint(loaded), bytes);
}

TEST(Alloc, ConservationAndPeak) {
  auto s0 = alloc_stats();
  EXPECT_EQ(s0.allocated - s0.freed, s0.live);
  {
    Tensor<double> t({1000});
    auto s1 = alloc_stats();
    EXPECT_EQ(s1.allocated - s1.freed, s1.live);
    EXPECT_GE(s1.live, s0.live + 8000);
    reset_peak();
    {
      Tensor<double> u({500});
    }
    auto s2 = alloc_stats();
    EXPECT_EQ(s2.allocated - s2.freed, s2.live);
    EXPECT_GE(s2.peak, s1.live + 4000);
    EXPECT_EQ(s2.live, s1.live);
  }
  auto s3 = alloc_stats();
  EXPECT_EQ(s3.live, s0.live);
  EXPECT_EQ(s3.allocated - s3.freed, s3.live);
}

TEST(Parallel, EachIndexOnceAndLaneIndependent) {
  std::vector<int> hits(1000, 0);
  with_lanes(4, [&] {
    EXPECT_GE(current_lanes(), 1u);
    EXPECT_LE(current_lanes(), 4u);
    parallel_for(0, hits.size(), 10, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) hits[i] += 1;
    });
  });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_EQ(current_lanes(), 1u);
  Rng rng(30);
  auto a = random_tensor({64, 48}, rng), b = random_tensor({48, 40}, rng);
  auto one = matmul(a, b);
  Tensor<double> four;
  with_lanes(4, [&] { four = matmul(a, b); });
  for (std::size_t i = 0; i < one.numel(); ++i) ASSERT_EQ(one[i], four[i]);
}
