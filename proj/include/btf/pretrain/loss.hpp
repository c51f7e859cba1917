#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "btf/models/head.hpp"
#include "btf/models/rnn.hpp"
#include "btf/pretrain/batch.hpp"

namespace btf::pretrain {

template <typename T>
struct PretrainHeads {
  models::LinearHead<T> mwm;  // d -> |X|
  models::LinearHead<T> mam;  // d -> |A|
  models::LinearHead<T> nsp;  // d -> 2

  static PretrainHeads create(std::size_t d, std::size_t vx, std::size_t va, std::uint64_t seed);
  numeric::ParamList<T> params() const;
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);
};

struct TaskStats {
  std::size_t count = 0;
  std::size_t correct = 0;     // argmax hits
  double prob_correct = 0.0;   // summed softmax probability of the target

  double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
  double mean_prob() const { return count ? prob_correct / static_cast<double>(count) : 0.0; }
  TaskStats& operator+=(const TaskStats& o) {
    count += o.count;
    correct += o.correct;
    prob_correct += o.prob_correct;
    return *this;
  }
};

template <typename T>
struct PretrainLoss {
  numeric::Tensor<T> total;  // ce_mwm + ce_mam + ce_nsp
  numeric::Tensor<T> ce_mwm, ce_mam, ce_nsp;
  TaskStats mwm, mam, nsp;
};

// Each cross-entropy averages over its own target set and is 0 when the set
// is empty. NSP is scored on the classification vector.
template <typename T>
PretrainLoss<T> pretrain_loss(const PretrainHeads<T>& heads, const models::EncoderOutput<T>& out,
                              const PretrainBatch& batch);

}  // namespace btf::pretrain
