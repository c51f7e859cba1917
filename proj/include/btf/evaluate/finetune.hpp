#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "btf/corpus/corpus.hpp"
#include "btf/models/encoder.hpp"
#include "btf/models/head.hpp"
#include "btf/tokenize/assemble.hpp"

namespace btf::evaluate {

enum class FinetuneMode { frozen, full };

std::string mode_name(FinetuneMode mode);
FinetuneMode parse_mode(const std::string& name);

struct FinetuneConfig {
  std::size_t epochs = 4;
  std::size_t batch_size = 16;
  double peak_lr = 2e-3;
  double frozen_peak_lr = 3e-2;  // head-only updates take larger steps
  double warmup_frac = 0.1;
  double weight_decay = 0.01;
  std::size_t max_tokens = 512;
  double holdout_fraction = 0.3;  // accounts kept out of fine-tuning for evaluation
  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  static FinetuneConfig from_json(const std::string& text);
};

// Category names in sorted order; ids index this list.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);
  static LabelSet from_flows(std::span<const corpus::AccountFlow> flows);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  // -1 when unknown.
  int id(const std::string& name) const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

// One 2-month mono sequence and the category id of each event (-1 for the
// synthetic empty-month event or an unknown label).
struct CategorizationExample {
  tokenize::TokenizedSequence seq;
  std::vector<int> labels;
};

// The first two consecutive months of every account that has them.
std::vector<CategorizationExample> make_categorization_examples(
    std::span<const corpus::AccountFlow> flows, const tokenize::Tokenizer& tokenizer,
    const LabelSet& labels, std::size_t max_tokens);

struct FinetuneResult {
  std::vector<double> epoch_loss;
  std::size_t optimizer_steps = 0;
};

// Shared training loop. `loss` builds the task loss from the encoder output
// of the given example indices. In frozen mode the encoder runs without a
// tape and only `head_params` are updated.
template <typename T>
FinetuneResult run_finetune(
    models::Encoder<T>& encoder, const numeric::ParamList<T>& head_params, FinetuneMode mode,
    const FinetuneConfig& config, std::size_t n_examples,
    const std::function<models::EncoderInput(std::span<const std::size_t>)>& input,
    const std::function<numeric::Tensor<T>(std::span<const std::size_t>, const models::EncoderOutput<T>&)>& loss);

// Throws ConfigError when head.outputs() != labels.size().
template <typename T>
FinetuneResult finetune_categorization(models::Encoder<T>& encoder, models::LinearHead<T>& head,
                                       const tokenize::Tokenizer& tokenizer, const LabelSet& labels,
                                       std::span<const CategorizationExample> examples, FinetuneMode mode,
                                       const FinetuneConfig& config);

// One prediction per event span, for every example.
template <typename T>
std::vector<std::vector<int>> predict_categorization(const models::Encoder<T>& encoder,
                                                     const models::LinearHead<T>& head,
                                                     const tokenize::Tokenizer& tokenizer,
                                                     std::span<const CategorizationExample> examples,
                                                     std::size_t batch_size);

// Labeled events only: (predicted, truth).
std::pair<std::vector<int>, std::vector<int>> flatten_labeled(
    std::span<const CategorizationExample> examples, std::span<const std::vector<int>> predictions);

// Most frequent label in `train`; accuracy of predicting it on `test`.
std::pair<int, double> majority_class(std::span<const CategorizationExample> train,
                                      std::span<const CategorizationExample> test);

template <typename T>
void save_head(const models::LinearHead<T>& head, const std::string& prefix, const std::filesystem::path& path);
template <typename T>
models::LinearHead<T> load_head(const std::filesystem::path& path, const std::string& prefix);

}  // namespace btf::evaluate
