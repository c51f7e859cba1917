#include "btf/evaluate/risk.hpp"

#include <cmath>

#include "btf/common/error.hpp"
#include "btf/evaluate/metrics.hpp"
#include "btf/numeric/ops.hpp"

namespace btf::evaluate {

int risk_label(const corpus::Month& month) {
  std::size_t n = 0;
  for (const auto& l : month.labels) n += l == kIncidentCategory ? 1 : 0;
  return n >= kRiskIncidentThreshold ? 1 : 0;
}

std::vector<RiskExample> make_risk_examples(std::span<const corpus::AccountFlow> flows,
                                            const tokenize::Tokenizer& tokenizer, std::size_t max_tokens) {
  std::vector<RiskExample> out;
  for (const auto& flow : flows) {
    const auto& ms = flow.months;
    for (std::size_t m = 0; m + 2 < ms.size(); ++m) {
      if (ms[m + 1].key != ms[m].key.next() || ms[m + 2].key != ms[m + 1].key.next()) continue;
      RiskExample ex;
      ex.seq = tokenizer.assemble(std::span<const corpus::Month>(ms.data() + m, 2), tokenize::NspRole::mono, max_tokens);
      ex.label = risk_label(ms[m + 2]);
      out.push_back(std::move(ex));
      break;
    }
  }
  return out;
}

std::vector<RiskExample> balance(std::span<const RiskExample> examples, Rng& rng) {
  std::vector<int> labels;
  labels.reserve(examples.size());
  for (const auto& e : examples) labels.push_back(e.label);
  std::vector<RiskExample> out;
  for (auto i : balance_downsample(labels, rng)) out.push_back(examples[i]);
  return out;
}

namespace {

models::EncoderInput input_of(std::span<const RiskExample> examples, std::span<const std::size_t> idx,
                              const tokenize::Tokenizer& tokenizer) {
  std::vector<tokenize::TokenizedSequence> seqs;
  seqs.reserve(idx.size());
  for (auto i : idx) seqs.push_back(examples[i].seq);
  return models::make_input(seqs, tokenizer);
}

}  // namespace

template <typename T>
FinetuneResult finetune_risk(models::Encoder<T>& encoder, models::LinearHead<T>& head,
                             const tokenize::Tokenizer& tokenizer, std::span<const RiskExample> examples,
                             FinetuneMode mode, const FinetuneConfig& config) {
  if (head.outputs() != 2) throw ConfigError("risk head must have 2 outputs");
  numeric::ParamList<T> hp;
  head.append_params(hp, "head.risk");
  return run_finetune<T>(
      encoder, hp, mode, config, examples.size(),
      [&](std::span<const std::size_t> idx) { return input_of(examples, idx, tokenizer); },
      [&](std::span<const std::size_t> idx, const models::EncoderOutput<T>& out) {
        std::vector<int> targets;
        for (auto i : idx) targets.push_back(examples[i].label);
        return numeric::cross_entropy(head(out.cls), targets, std::vector<bool>(targets.size(), true));
      });
}

template <typename T>
RiskScores predict_risk(const models::Encoder<T>& encoder, const models::LinearHead<T>& head,
                        const tokenize::Tokenizer& tokenizer, std::span<const RiskExample> examples,
                        std::size_t batch_size) {
  numeric::NoGrad<T> no_grad;
  RiskScores out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(examples.size(), start + batch_size); ++i) idx.push_back(i);
    const auto logits = head(encoder.forward(input_of(examples, idx, tokenizer)).cls);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const double z0 = static_cast<double>(logits[2 * b]);
      const double z1 = static_cast<double>(logits[2 * b + 1]);
      out.score.push_back(1.0 / (1.0 + std::exp(z0 - z1)));
      out.predicted.push_back(z1 > z0 ? 1 : 0);
    }
  }
  return out;
}

#define BTF_INSTANTIATE(T)                                                                                     \
  template FinetuneResult finetune_risk(models::Encoder<T>&, models::LinearHead<T>&, const tokenize::Tokenizer&, \
                                        std::span<const RiskExample>, FinetuneMode, const FinetuneConfig&);     \
  template RiskScores predict_risk(const models::Encoder<T>&, const models::LinearHead<T>&,                    \
                                   const tokenize::Tokenizer&, std::span<const RiskExample>, std::size_t);

BTF_INSTANTIATE(float)
BTF_INSTANTIATE(double)

#undef BTF_INSTANTIATE

}  // namespace btf::evaluate
