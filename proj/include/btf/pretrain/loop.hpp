#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "btf/corpus/corpus.hpp"
#include "btf/models/encoder.hpp"
#include "btf/pretrain/loss.hpp"

namespace btf::pretrain {

struct PretrainConfig {
  std::size_t epochs = 5;
  // Defaults are the desk recipe (small batches, long warmup, no clipping).
  std::size_t batch_size = 4;
  std::size_t grad_accum = 1;
  double peak_lr = 1e-2;
  double warmup_frac = 0.3;
  double weight_decay = 0.01;
  double max_grad_norm = 0.0;  // 0 disables clipping
  double p_mwm = 0.15;
  double p_mam = 0.15;
  double p_nsp = 0.5;
  std::size_t max_tokens = 512;
  std::size_t checkpoint_every = 0;  // optimizer steps; 0 keeps only the final state
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;

  // Batch 32, accumulation 32, 50 epochs, p_MWM = p_MAM = 0.05, p_NSP = 0.5,
  // 1500 tokens (rnn) or 800 (transformer).
  static PretrainConfig paper(models::Arch arch);
  void validate() const;
  std::string to_json() const;
  // Missing keys keep their defaults.
  static PretrainConfig from_json(const std::string& text);
};

struct LogRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double ce_mwm = 0.0, ce_mam = 0.0, ce_nsp = 0.0;
  double acc_mwm = 0.0, acc_mam = 0.0, acc_nsp = 0.0;
};

std::string log_csv(std::span<const LogRow> rows);

struct EvalStats {
  TaskStats mwm, mam, nsp;
};

struct AccountSplit {
  std::vector<std::size_t> train, heldout;
};
// Deterministic shuffle-and-cut of account indices.
AccountSplit split_accounts(std::size_t n_accounts, double holdout_fraction, std::uint64_t seed);
std::vector<corpus::AccountFlow> select_accounts(std::span<const corpus::AccountFlow> flows,
                                                 std::span<const std::size_t> indices);

// Masked NSP pairs of every account in `pool` that has a continuation month.
struct PairExample {
  MaskedSequence masked;
  int label = 0;
};
std::vector<PairExample> make_pair_examples(std::span<const corpus::AccountFlow> pool,
                                            const tokenize::Tokenizer& tokenizer,
                                            const PretrainConfig& config, Rng& rng);

template <typename T>
struct PretrainResult {
  std::vector<LogRow> log;
  std::size_t optimizer_steps = 0;
};

// Training runs over the accounts of `flows` (normalized wordings) in the
// given order; NSP negatives come from the same set.
template <typename T>
PretrainResult<T> pretrain_loop(models::Encoder<T>& encoder, PretrainHeads<T>& heads,
                                const tokenize::Tokenizer& tokenizer,
                                std::span<const corpus::AccountFlow> flows, const PretrainConfig& config,
                                const std::filesystem::path& out_dir = {},
                                const std::function<void(const LogRow&)>& on_step = {});

// Inference-mode accuracies on fixed examples.
template <typename T>
EvalStats evaluate_pretrain(const models::Encoder<T>& encoder, const PretrainHeads<T>& heads,
                            const tokenize::Tokenizer& tokenizer, std::span<const PairExample> examples,
                            std::size_t batch_size);

// Majority-token baselines: the most frequent wording / amount id over event
// positions of `reference` and its hit rate on the targets of `examples`.
struct MajorityBaseline {
  int mwm_id = -1, mam_id = -1;
  double mwm_accuracy = 0.0, mam_accuracy = 0.0, nsp_accuracy = 0.0;
};
MajorityBaseline majority_baseline(std::span<const corpus::AccountFlow> reference,
                                   const tokenize::Tokenizer& tokenizer,
                                   std::span<const PairExample> examples);

// Nearest-centroid NSP classifier on two hand-made pair features (wording
// and amount histogram overlap between the two months), fitted on `train`
// and scored on `test`. Serves as a separability check of the synthetic data.
double nsp_centroid_oracle(std::span<const PairExample> train, std::span<const PairExample> test);

}  // namespace btf::pretrain
