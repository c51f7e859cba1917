#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "btf/evaluate/finetune.hpp"

namespace btf::evaluate {

inline constexpr const char* kIncidentCategory = "incident";
inline constexpr std::size_t kRiskIncidentThreshold = 2;

// Synthetic default rule: a month is risky when it carries at least two
// "incident" events (rejected debits, intervention fees).
int risk_label(const corpus::Month& month);

// Months m, m+1 as a mono sequence, labelled by risk_label(month m+2); the
// first such window of each account.
struct RiskExample {
  tokenize::TokenizedSequence seq;
  int label = 0;
};

std::vector<RiskExample> make_risk_examples(std::span<const corpus::AccountFlow> flows,
                                            const tokenize::Tokenizer& tokenizer, std::size_t max_tokens);

// Balanced subset of the examples (negatives downsampled).
std::vector<RiskExample> balance(std::span<const RiskExample> examples, Rng& rng);

// Head d -> 2 over the classification vector.
template <typename T>
FinetuneResult finetune_risk(models::Encoder<T>& encoder, models::LinearHead<T>& head,
                             const tokenize::Tokenizer& tokenizer, std::span<const RiskExample> examples,
                             FinetuneMode mode, const FinetuneConfig& config);

struct RiskScores {
  std::vector<double> score;  // P(label = 1)
  std::vector<int> predicted;
};

template <typename T>
RiskScores predict_risk(const models::Encoder<T>& encoder, const models::LinearHead<T>& head,
                        const tokenize::Tokenizer& tokenizer, std::span<const RiskExample> examples,
                        std::size_t batch_size);

}  // namespace btf::evaluate
