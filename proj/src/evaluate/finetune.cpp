#include "btf/evaluate/finetune.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "btf/common/error.hpp"
#include "btf/numeric/checkpoint.hpp"
#include "btf/numeric/ops.hpp"

namespace btf::evaluate {

std::string mode_name(FinetuneMode mode) { return mode == FinetuneMode::frozen ? "frozen" : "full"; }

FinetuneMode parse_mode(const std::string& name) {
  if (name == "frozen") return FinetuneMode::frozen;
  if (name == "full") return FinetuneMode::full;
  throw ConfigError("unknown fine-tuning mode '" + name + "' (expected frozen or full)");
}

void FinetuneConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw ConfigError("finetune config: epochs and batch_size must be > 0");
  if (!(peak_lr > 0.0) || !(frozen_peak_lr > 0.0)) throw ConfigError("finetune config: learning rates must be > 0");
  if (warmup_frac < 0.0 || warmup_frac > 1.0) throw ConfigError("finetune config: warmup_frac must lie in [0, 1]");
  if (max_tokens != 0 && max_tokens < 3) throw ConfigError("finetune config: max_tokens too small");
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
    throw ConfigError("finetune config: holdout_fraction must lie in (0, 1)");
  }
}

std::string FinetuneConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["peak_lr"] = peak_lr;
  j["frozen_peak_lr"] = frozen_peak_lr;
  j["warmup_frac"] = warmup_frac;
  j["weight_decay"] = weight_decay;
  j["max_tokens"] = max_tokens;
  j["holdout_fraction"] = holdout_fraction;
  j["seed"] = seed;
  return j.dump(1) + "\n";
}

FinetuneConfig FinetuneConfig::from_json(const std::string& text) {
  FinetuneConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.frozen_peak_lr = j.value("frozen_peak_lr", c.frozen_peak_lr);
    c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("finetune config: ") + e.what());
  }
  c.validate();
  return c;
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  std::sort(names_.begin(), names_.end());
  names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
  for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = static_cast<int>(i);
}

LabelSet LabelSet::from_flows(std::span<const corpus::AccountFlow> flows) {
  std::set<std::string> seen;
  for (const auto& f : flows) {
    for (const auto& m : f.months) {
      for (const auto& l : m.labels) {
        if (!l.empty()) seen.insert(l);
      }
    }
  }
  return LabelSet(std::vector<std::string>(seen.begin(), seen.end()));
}

int LabelSet::id(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

std::vector<CategorizationExample> make_categorization_examples(
    std::span<const corpus::AccountFlow> flows, const tokenize::Tokenizer& tokenizer,
    const LabelSet& labels, std::size_t max_tokens) {
  std::vector<CategorizationExample> out;
  for (const auto& flow : flows) {
    for (std::size_t m = 0; m + 1 < flow.months.size(); ++m) {
      if (flow.months[m + 1].key != flow.months[m].key.next()) continue;
      const std::span<const corpus::Month> window(flow.months.data() + m, 2);
      CategorizationExample ex;
      ex.seq = tokenizer.assemble(window, tokenize::NspRole::mono, max_tokens);
      for (const auto& [month, txn] : ex.seq.event_origin) {
        const auto& labs = window[month].labels;
        ex.labels.push_back(txn < labs.size() ? labels.id(labs[txn]) : -1);
      }
      out.push_back(std::move(ex));
      break;
    }
  }
  return out;
}

template <typename T>
FinetuneResult run_finetune(
    models::Encoder<T>& encoder, const numeric::ParamList<T>& head_params, FinetuneMode mode,
    const FinetuneConfig& config, std::size_t n_examples,
    const std::function<models::EncoderInput(std::span<const std::size_t>)>& input,
    const std::function<numeric::Tensor<T>(std::span<const std::size_t>, const models::EncoderOutput<T>&)>& loss) {
  config.validate();
  if (n_examples == 0) throw InputError("finetune: no training examples");
  auto params = head_params;
  if (mode == FinetuneMode::full) {
    for (const auto& p : encoder.params()) params.push_back(p);
  }
  numeric::AdamW<T> opt(params, numeric::AdamWConfig{0.9, 0.999, 1e-8, config.weight_decay});
  const std::size_t per_epoch = (n_examples + config.batch_size - 1) / config.batch_size;
  const std::size_t total = per_epoch * config.epochs;

  Rng dropout_rng = Rng::derive(config.seed, 0x46545244ULL);
  FinetuneResult result;
  std::vector<std::size_t> order(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) order[i] = i;
  const double peak = mode == FinetuneMode::frozen ? config.frozen_peak_lr : config.peak_lr;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, 2000 + epoch);
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_examples; start += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, n_examples - start));
      const auto in = input(idx);
      models::EncoderOutput<T> out;
      if (mode == FinetuneMode::frozen) {
        numeric::NoGrad<T> no_grad;
        out = encoder.forward(in);
      }
      numeric::Tape<T> tape;
      if (mode == FinetuneMode::full) out = encoder.forward(in, models::ForwardContext{true, &dropout_rng});
      auto l = loss(idx, out);
      epoch_loss += static_cast<double>(l.item());
      tape.backward(l);
      opt.step(numeric::lr_schedule(result.optimizer_steps, total, peak, config.warmup_frac));
      opt.zero_grad();
      ++result.optimizer_steps;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(per_epoch));
  }
  return result;
}

namespace {

// Spans of labeled events as rows of the padded layout, with their targets.
void labeled_rows(std::span<const CategorizationExample> examples, std::span<const std::size_t> idx,
                  std::size_t stride, std::vector<std::pair<std::size_t, std::size_t>>& spans,
                  std::vector<int>& targets) {
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& ex = examples[idx[b]];
    for (std::size_t e = 0; e < ex.seq.event_spans.size(); ++e) {
      if (ex.labels[e] < 0) continue;
      spans.emplace_back(b * stride + ex.seq.event_spans[e].first, b * stride + ex.seq.event_spans[e].second);
      targets.push_back(ex.labels[e]);
    }
  }
}

models::EncoderInput input_of(std::span<const CategorizationExample> examples, std::span<const std::size_t> idx,
                              const tokenize::Tokenizer& tokenizer) {
  std::vector<tokenize::TokenizedSequence> seqs;
  seqs.reserve(idx.size());
  for (auto i : idx) seqs.push_back(examples[i].seq);
  return models::make_input(seqs, tokenizer);
}

}  // namespace

template <typename T>
FinetuneResult finetune_categorization(models::Encoder<T>& encoder, models::LinearHead<T>& head,
                                       const tokenize::Tokenizer& tokenizer, const LabelSet& labels,
                                       std::span<const CategorizationExample> examples, FinetuneMode mode,
                                       const FinetuneConfig& config) {
  if (head.outputs() != labels.size()) {
    throw ConfigError("categorization head has " + std::to_string(head.outputs()) + " outputs but the label set has " +
                      std::to_string(labels.size()) + " classes");
  }
  if (labels.size() < 2) throw ConfigError("categorization needs at least 2 classes");
  for (const auto& ex : examples) {
    for (int l : ex.labels) {
      if (l >= static_cast<int>(labels.size())) throw ConfigError("categorization label id outside the head");
    }
  }
  numeric::ParamList<T> hp;
  head.append_params(hp, "head.cat");
  return run_finetune<T>(
      encoder, hp, mode, config, examples.size(),
      [&](std::span<const std::size_t> idx) { return input_of(examples, idx, tokenizer); },
      [&](std::span<const std::size_t> idx, const models::EncoderOutput<T>& out) {
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        std::vector<int> targets;
        const std::size_t stride = out.hidden.rows() / idx.size();
        labeled_rows(examples, idx, stride, spans, targets);
        if (targets.empty()) return numeric::Tensor<T>::scalar(T(0));
        auto logits = head(numeric::segment_mean(out.hidden, spans));
        return numeric::cross_entropy(logits, targets, std::vector<bool>(targets.size(), true));
      });
}

template <typename T>
std::vector<std::vector<int>> predict_categorization(const models::Encoder<T>& encoder,
                                                     const models::LinearHead<T>& head,
                                                     const tokenize::Tokenizer& tokenizer,
                                                     std::span<const CategorizationExample> examples,
                                                     std::size_t batch_size) {
  numeric::NoGrad<T> no_grad;
  std::vector<std::vector<int>> out;
  out.reserve(examples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(examples.size(), start + batch_size); ++i) idx.push_back(i);
    const auto in = input_of(examples, idx, tokenizer);
    const auto enc = encoder.forward(in);
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t b = 0; b < idx.size(); ++b) {
      for (const auto& [lo, hi] : examples[idx[b]].seq.event_spans) spans.emplace_back(b * in.stride + lo, b * in.stride + hi);
    }
    const auto pred = models::argmax_rows(head(numeric::segment_mean(enc.hidden, spans)));
    std::size_t k = 0;
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const std::size_t n = examples[idx[b]].seq.event_spans.size();
      out.emplace_back(pred.begin() + static_cast<std::ptrdiff_t>(k), pred.begin() + static_cast<std::ptrdiff_t>(k + n));
      k += n;
    }
  }
  return out;
}

std::pair<std::vector<int>, std::vector<int>> flatten_labeled(
    std::span<const CategorizationExample> examples, std::span<const std::vector<int>> predictions) {
  if (examples.size() != predictions.size()) throw InputError("flatten_labeled: length mismatch");
  std::pair<std::vector<int>, std::vector<int>> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (predictions[i].size() != examples[i].labels.size()) throw InputError("flatten_labeled: event count mismatch");
    for (std::size_t e = 0; e < predictions[i].size(); ++e) {
      if (examples[i].labels[e] < 0) continue;
      out.first.push_back(predictions[i][e]);
      out.second.push_back(examples[i].labels[e]);
    }
  }
  return out;
}

std::pair<int, double> majority_class(std::span<const CategorizationExample> train,
                                      std::span<const CategorizationExample> test) {
  std::map<int, std::size_t> counts;
  for (const auto& ex : train) {
    for (int l : ex.labels) {
      if (l >= 0) ++counts[l];
    }
  }
  if (counts.empty()) throw InputError("majority_class: no labeled training events");
  int best = counts.begin()->first;
  for (const auto& [id, c] : counts) {
    if (c > counts[best]) best = id;
  }
  std::size_t n = 0, hit = 0;
  for (const auto& ex : test) {
    for (int l : ex.labels) {
      if (l < 0) continue;
      ++n;
      hit += l == best ? 1 : 0;
    }
  }
  return {best, n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0};
}

template <typename T>
void save_head(const models::LinearHead<T>& head, const std::string& prefix, const std::filesystem::path& path) {
  numeric::ParamList<T> list;
  head.append_params(list, prefix);
  numeric::save_checkpoint(list, path);
}

template <typename T>
models::LinearHead<T> load_head(const std::filesystem::path& path, const std::string& prefix) {
  const auto records = numeric::read_checkpoint(path);
  numeric::Shape ws, bs;
  for (const auto& r : records) {
    if (r.name == prefix + ".w") ws = r.shape;
    if (r.name == prefix + ".b") bs = r.shape;
  }
  if (ws.size() != 2 || bs.size() != 1) throw LookupError("no head '" + prefix + "' in " + path.string());
  models::LinearHead<T> head{numeric::Tensor<T>(ws), numeric::Tensor<T>(bs)};
  head.w.set_requires_grad(true);
  head.b.set_requires_grad(true);
  numeric::ParamList<T> list;
  head.append_params(list, prefix);
  numeric::assign_records(list, records);
  return head;
}

#define BTF_INSTANTIATE(T)                                                                                       \
  template FinetuneResult run_finetune(                                                                          \
      models::Encoder<T>&, const numeric::ParamList<T>&, FinetuneMode, const FinetuneConfig&, std::size_t,      \
      const std::function<models::EncoderInput(std::span<const std::size_t>)>&,                                  \
      const std::function<numeric::Tensor<T>(std::span<const std::size_t>, const models::EncoderOutput<T>&)>&); \
  template FinetuneResult finetune_categorization(models::Encoder<T>&, models::LinearHead<T>&,                   \
                                                  const tokenize::Tokenizer&, const LabelSet&,                   \
                                                  std::span<const CategorizationExample>, FinetuneMode,          \
                                                  const FinetuneConfig&);                                        \
  template std::vector<std::vector<int>> predict_categorization(                                                 \
      const models::Encoder<T>&, const models::LinearHead<T>&, const tokenize::Tokenizer&,                       \
      std::span<const CategorizationExample>, std::size_t);                                                     \
  template void save_head(const models::LinearHead<T>&, const std::string&, const std::filesystem::path&);       \
  template models::LinearHead<T> load_head(const std::filesystem::path&, const std::string&);

BTF_INSTANTIATE(float)
BTF_INSTANTIATE(double)

#undef BTF_INSTANTIATE

}  // namespace btf::evaluate
