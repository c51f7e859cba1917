#include "btf/pretrain/loop.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "btf/common/error.hpp"
#include "btf/common/format.hpp"
#include "btf/numeric/ops.hpp"
#include "btf/pretrain/nsp.hpp"

namespace btf::pretrain {

PretrainConfig PretrainConfig::paper(models::Arch arch) {
  PretrainConfig c;
  c.epochs = 50;
  c.batch_size = 32;
  c.grad_accum = 32;
  c.p_mwm = 0.05;
  c.p_mam = 0.05;
  c.p_nsp = 0.5;
  c.max_tokens = arch == models::Arch::rnn ? 1500 : 800;
  return c;
}

void PretrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || grad_accum == 0) {
    throw ConfigError("pretrain config: epochs, batch_size and grad_accum must be > 0");
  }
  auto prob = [](double p, const char* name) {
    if (p < 0.0 || p > 1.0) throw ConfigError(std::string("pretrain config: ") + name + " must lie in [0, 1]");
  };
  prob(p_mwm, "p_mwm");
  prob(p_mam, "p_mam");
  prob(p_nsp, "p_nsp");
  prob(warmup_frac, "warmup_frac");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw ConfigError("pretrain config: holdout_fraction must lie in [0, 1)");
  }
  if (max_grad_norm < 0.0) throw ConfigError("pretrain config: max_grad_norm must be >= 0");
  if (!(peak_lr > 0.0)) throw ConfigError("pretrain config: peak_lr must be > 0");
  if (max_tokens != 0 && max_tokens < 5) throw ConfigError("pretrain config: max_tokens too small");
}

std::string PretrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["grad_accum"] = grad_accum;
  j["peak_lr"] = peak_lr;
  j["warmup_frac"] = warmup_frac;
  j["weight_decay"] = weight_decay;
  j["max_grad_norm"] = max_grad_norm;
  j["p_mwm"] = p_mwm;
  j["p_mam"] = p_mam;
  j["p_nsp"] = p_nsp;
  j["max_tokens"] = max_tokens;
  j["checkpoint_every"] = checkpoint_every;
  j["holdout_fraction"] = holdout_fraction;
  j["seed"] = seed;
  return j.dump(1) + "\n";
}

PretrainConfig PretrainConfig::from_json(const std::string& text) {
  PretrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.grad_accum = j.value("grad_accum", c.grad_accum);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    c.p_mwm = j.value("p_mwm", c.p_mwm);
    c.p_mam = j.value("p_mam", c.p_mam);
    c.p_nsp = j.value("p_nsp", c.p_nsp);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("pretrain config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string log_csv(std::span<const LogRow> rows) {
  std::string out = "step,lr,loss,ce_mwm,ce_mam,ce_nsp,acc_mwm,acc_mam,acc_nsp\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step);
    for (double v : {r.lr, r.loss, r.ce_mwm, r.ce_mam, r.ce_nsp, r.acc_mwm, r.acc_mam, r.acc_nsp}) {
      out += ',' + format_exact(v);
    }
    out += '\n';
  }
  return out;
}

AccountSplit split_accounts(std::size_t n_accounts, double holdout_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n_accounts);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, 0x53504c4954ULL);
  rng.shuffle(idx);
  const auto n_hold = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(n_accounts)));
  AccountSplit split;
  split.heldout.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
  split.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_hold), idx.end());
  std::sort(split.heldout.begin(), split.heldout.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::vector<corpus::AccountFlow> select_accounts(std::span<const corpus::AccountFlow> flows,
                                                 std::span<const std::size_t> indices) {
  std::vector<corpus::AccountFlow> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(flows[i]);
  return out;
}

namespace {

std::vector<std::size_t> eligible_accounts(std::span<const corpus::AccountFlow> pool) {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < pool.size(); ++a) {
    if (!continuation_months(pool[a]).empty()) out.push_back(a);
  }
  return out;
}

PairExample make_example(std::span<const corpus::AccountFlow> pool, std::size_t account,
                         const tokenize::Tokenizer& tokenizer, const PretrainConfig& config, Rng& rng) {
  const auto pair = make_nsp_pair(pool, account, rng, config.p_nsp);
  const corpus::Month months[2] = {*pair.first, *pair.second};
  const auto seq = tokenizer.assemble(months, tokenize::NspRole::bi, config.max_tokens);
  return PairExample{apply_masking(seq, rng, config.p_mwm, config.p_mam, tokenizer), pair.label};
}

PretrainBatch batch_of(std::span<const PairExample> examples, const tokenize::Tokenizer& tokenizer) {
  std::vector<MaskedSequence> seqs;
  std::vector<int> labels;
  seqs.reserve(examples.size());
  for (const auto& e : examples) {
    seqs.push_back(e.masked);
    labels.push_back(e.label);
  }
  return make_batch(seqs, labels, tokenizer);
}

}  // namespace

std::vector<PairExample> make_pair_examples(std::span<const corpus::AccountFlow> pool,
                                            const tokenize::Tokenizer& tokenizer,
                                            const PretrainConfig& config, Rng& rng) {
  std::vector<PairExample> out;
  for (std::size_t a : eligible_accounts(pool)) out.push_back(make_example(pool, a, tokenizer, config, rng));
  return out;
}

template <typename T>
PretrainResult<T> pretrain_loop(models::Encoder<T>& encoder, PretrainHeads<T>& heads,
                                const tokenize::Tokenizer& tokenizer,
                                std::span<const corpus::AccountFlow> flows, const PretrainConfig& config,
                                const std::filesystem::path& out_dir,
                                const std::function<void(const LogRow&)>& on_step) {
  config.validate();
  if (flows.empty()) throw ConfigError("pretrain: empty corpus");
  const auto accounts = eligible_accounts(flows);
  if (accounts.empty()) throw ConfigError("pretrain: no account has two consecutive months");

  auto params = encoder.params();
  for (auto& p : heads.params()) params.push_back(p);
  numeric::AdamW<T> opt(params, numeric::AdamWConfig{0.9, 0.999, 1e-8, config.weight_decay});

  const std::size_t micro_per_epoch = (accounts.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t steps_per_epoch = (micro_per_epoch + config.grad_accum - 1) / config.grad_accum;
  const std::size_t total_steps = steps_per_epoch * config.epochs;

  PretrainResult<T> result;
  Rng dropout_rng = Rng::derive(config.seed, 0x44524f50ULL);
  const models::ForwardContext ctx{true, &dropout_rng};

  auto save_state = [&](const std::filesystem::path& dir) {
    encoder.save(dir);
    heads.save(dir / "heads.ckpt");
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, 1000 + epoch);
    auto order = accounts;
    rng.shuffle(order);
    LogRow row;
    TaskStats mwm, mam, nsp;
    std::size_t micro_in_step = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<PairExample> examples;
      for (std::size_t k = start; k < end; ++k) {
        examples.push_back(make_example(flows, order[k], tokenizer, config, rng));
      }
      const auto batch = batch_of(examples, tokenizer);
      {
        numeric::Tape<T> tape;
        const auto out = encoder.forward(batch.input, ctx);
        auto loss = pretrain_loss(heads, out, batch);
        auto scaled = numeric::scale(loss.total, static_cast<T>(1.0 / static_cast<double>(config.grad_accum)));
        tape.backward(scaled);
        row.loss += static_cast<double>(loss.total.item());
        row.ce_mwm += static_cast<double>(loss.ce_mwm.item());
        row.ce_mam += static_cast<double>(loss.ce_mam.item());
        row.ce_nsp += static_cast<double>(loss.ce_nsp.item());
        mwm += loss.mwm;
        mam += loss.mam;
        nsp += loss.nsp;
      }
      ++micro_in_step;
      const bool last = end == order.size();
      if (micro_in_step < config.grad_accum && !last) continue;

      // A short final accumulation window is rescaled to a full one.
      if (micro_in_step < config.grad_accum) {
        const T fix = static_cast<T>(static_cast<double>(config.grad_accum) / static_cast<double>(micro_in_step));
        for (auto& p : params) {
          if (!p.tensor.has_grad()) continue;
          T* g = p.tensor.grad_data();
          for (std::size_t i = 0; i < p.tensor.numel(); ++i) g[i] *= fix;
        }
      }
      numeric::clip_grad_norm(params, config.max_grad_norm);
      row.lr = numeric::lr_schedule(result.optimizer_steps, total_steps, config.peak_lr, config.warmup_frac);
      opt.step(row.lr);
      opt.zero_grad();
      ++result.optimizer_steps;
      const double n = static_cast<double>(micro_in_step);
      row.step = result.optimizer_steps;
      row.loss /= n;
      row.ce_mwm /= n;
      row.ce_mam /= n;
      row.ce_nsp /= n;
      row.acc_mwm = mwm.accuracy();
      row.acc_mam = mam.accuracy();
      row.acc_nsp = nsp.accuracy();
      result.log.push_back(row);
      if (on_step) on_step(row);
      if (!out_dir.empty() && config.checkpoint_every > 0 &&
          result.optimizer_steps % config.checkpoint_every == 0) {
        save_state(out_dir / ("step_" + std::to_string(result.optimizer_steps)));
      }
      row = LogRow{};
      mwm = mam = nsp = TaskStats{};
      micro_in_step = 0;
    }
  }

  if (!out_dir.empty()) {
    save_state(out_dir / "final");
    std::ofstream os(out_dir / "pretrain_log.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write '" + (out_dir / "pretrain_log.csv").string() + "'");
    os << log_csv(result.log);
  }
  return result;
}

template <typename T>
EvalStats evaluate_pretrain(const models::Encoder<T>& encoder, const PretrainHeads<T>& heads,
                            const tokenize::Tokenizer& tokenizer, std::span<const PairExample> examples,
                            std::size_t batch_size) {
  numeric::NoGrad<T> no_grad;
  EvalStats stats;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const auto part = examples.subspan(start, std::min(batch_size, examples.size() - start));
    const auto batch = batch_of(part, tokenizer);
    const auto loss = pretrain_loss(heads, encoder.forward(batch.input), batch);
    stats.mwm += loss.mwm;
    stats.mam += loss.mam;
    stats.nsp += loss.nsp;
  }
  return stats;
}

MajorityBaseline majority_baseline(std::span<const corpus::AccountFlow> reference,
                                   const tokenize::Tokenizer& tokenizer,
                                   std::span<const PairExample> examples) {
  std::map<int, std::size_t> x_counts, a_counts;
  for (const auto& flow : reference) {
    for (const auto& month : flow.months) {
      const auto seq = tokenizer.assemble(std::span<const corpus::Month>(&month, 1), tokenize::NspRole::mono);
      for (const auto& [lo, hi] : seq.event_spans) {
        for (std::size_t p = lo; p < hi; ++p) {
          ++x_counts[seq.x_ids[p]];
          ++a_counts[seq.a_ids[p]];
        }
      }
    }
  }
  auto top = [](const std::map<int, std::size_t>& counts) {
    int best = -1;
    std::size_t n = 0;
    for (const auto& [id, c] : counts) {
      if (c > n) {
        n = c;
        best = id;
      }
    }
    return best;
  };
  MajorityBaseline base;
  base.mwm_id = top(x_counts);
  base.mam_id = top(a_counts);
  std::size_t mwm_n = 0, mwm_hit = 0, mam_n = 0, mam_hit = 0, pos = 0;
  for (const auto& e : examples) {
    for (const auto& [p, id] : e.masked.p_mwm) {
      ++mwm_n;
      mwm_hit += id == base.mwm_id ? 1 : 0;
    }
    for (const auto& [p, id] : e.masked.p_mam) {
      ++mam_n;
      mam_hit += id == base.mam_id ? 1 : 0;
    }
    pos += e.label == 1 ? 1 : 0;
  }
  base.mwm_accuracy = mwm_n ? static_cast<double>(mwm_hit) / static_cast<double>(mwm_n) : 0.0;
  base.mam_accuracy = mam_n ? static_cast<double>(mam_hit) / static_cast<double>(mam_n) : 0.0;
  if (!examples.empty()) {
    const double frac = static_cast<double>(pos) / static_cast<double>(examples.size());
    base.nsp_accuracy = std::max(frac, 1.0 - frac);
  }
  return base;
}

namespace {

std::array<double, 2> pair_features(const PairExample& e) {
  const auto& s = e.masked.seq;
  std::map<int, std::array<double, 2>> xh, ah;
  for (std::size_t p = 0; p < s.size(); ++p) {
    if (!s.attn_mask[p]) break;
    const int side = s.t_ids[p];
    xh[s.x_ids[p]][static_cast<std::size_t>(side)] += 1.0;
    ah[s.a_ids[p]][static_cast<std::size_t>(side)] += 1.0;
  }
  auto cosine = [](const std::map<int, std::array<double, 2>>& h) {
    double dot = 0, n0 = 0, n1 = 0;
    for (const auto& [id, v] : h) {
      dot += v[0] * v[1];
      n0 += v[0] * v[0];
      n1 += v[1] * v[1];
    }
    return (n0 > 0 && n1 > 0) ? dot / std::sqrt(n0 * n1) : 0.0;
  };
  return {cosine(xh), cosine(ah)};
}

}  // namespace

double nsp_centroid_oracle(std::span<const PairExample> train, std::span<const PairExample> test) {
  std::array<std::array<double, 2>, 2> centroid{};
  std::array<double, 2> count{};
  for (const auto& e : train) {
    const auto f = pair_features(e);
    const auto c = static_cast<std::size_t>(e.label);
    centroid[c][0] += f[0];
    centroid[c][1] += f[1];
    count[c] += 1.0;
  }
  if (count[0] == 0 || count[1] == 0) throw InputError("nsp_centroid_oracle: training pairs lack a class");
  for (std::size_t c = 0; c < 2; ++c) {
    centroid[c][0] /= count[c];
    centroid[c][1] /= count[c];
  }
  std::size_t hits = 0;
  for (const auto& e : test) {
    const auto f = pair_features(e);
    auto dist = [&](std::size_t c) {
      return std::hypot(f[0] - centroid[c][0], f[1] - centroid[c][1]);
    };
    const int pred = dist(1) < dist(0) ? 1 : 0;
    hits += pred == e.label ? 1 : 0;
  }
  return test.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(test.size());
}

#define BTF_INSTANTIATE(T)                                                                              \
  template PretrainResult<T> pretrain_loop(models::Encoder<T>&, PretrainHeads<T>&,                       \
                                           const tokenize::Tokenizer&, std::span<const corpus::AccountFlow>, \
                                           const PretrainConfig&, const std::filesystem::path&,          \
                                           const std::function<void(const LogRow&)>&);                  \
  template EvalStats evaluate_pretrain(const models::Encoder<T>&, const PretrainHeads<T>&,               \
                                       const tokenize::Tokenizer&, std::span<const PairExample>, std::size_t);

BTF_INSTANTIATE(float)
BTF_INSTANTIATE(double)

#undef BTF_INSTANTIATE

}  // namespace btf::pretrain
