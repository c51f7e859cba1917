#include "btf/cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "btf/bench/bench.hpp"
#include "btf/common/error.hpp"
#include "btf/common/format.hpp"
#include "btf/corpus/corpus.hpp"
#include "btf/evaluate/finetune.hpp"
#include "btf/evaluate/metrics.hpp"
#include "btf/evaluate/risk.hpp"
#include "btf/preprocess/normalize.hpp"
#include "btf/pretrain/loop.hpp"
#include "btf/pretrain/loss.hpp"
#include "btf/tokenize/symbols.hpp"
#include "btf/tokenize/unigram.hpp"

namespace btf::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string precision() {
  const char* env = std::getenv("BTF_PRECISION");
  if (env == nullptr || *env == '\0') return "f32";
  const std::string p(env);
  if (p != "f32" && p != "f64") throw ConfigError("BTF_PRECISION must be f32 or f64, got '" + p + "'");
  return p;
}

std::string count_params_text(const models::EncoderConfig& config) {
  const auto c = models::count_params(config);
  const auto f = models::formula_params(config);
  std::ostringstream os;
  os << "arch " << models::arch_name(config.arch) << "  d=" << config.d << " h=" << config.h << " L=" << config.L;
  if (config.arch == models::Arch::transformer) os << " J=" << config.J;
  os << " |X|=" << config.vx << " |A|=" << config.va << " |D|=" << config.vd << "\n";
  for (const auto& [name, n] : c.components) os << "  " << name << " " << n << "\n";
  os << "embedding " << c.embedding << "\n";
  os << "encoder " << c.encoder << "\n";
  os << "total " << c.total << " (" << models::display_millions(c.total) << ")\n";
  os << "closed form " << f.total << (f.total == c.total ? " (match)" : " (MISMATCH)") << "\n";
  return os.str();
}

namespace {

template <typename F>
auto with_precision(F&& f) {
  if (precision() == "f64") return f(double{});
  return f(float{});
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  os << text;
  if (!os) throw IoError("write failed on '" + p.string() + "'");
}

void require_input(const fs::path& p) {
  if (p.empty()) throw InputError("missing required input path");
  if (!fs::exists(p)) throw IoError("input '" + p.string() + "' does not exist");
}

// Section of the --config file, serialized back to text for the module parsers.
std::optional<std::string> section(const json& config, const char* name) {
  if (!config.is_object()) return std::nullopt;
  auto it = config.find(name);
  if (it == config.end()) return std::nullopt;
  return it->dump();
}

// Keys absent from the section keep the values of `base`; a non-empty `arch`
// overrides the section.
models::EncoderConfig merged_encoder(const models::EncoderConfig& base, const std::string& text,
                                     const std::string& arch) {
  auto j = json::parse(base.to_json());
  j.update(json::parse(text));
  if (!arch.empty()) j["arch"] = arch;
  return models::EncoderConfig::from_json(j.dump());
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string arch;
  json config = json::object();

  void load() {
    if (config_path.empty()) return;
    try {
      config = json::parse(read_file(config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(0, "config '" + config_path + "': " + e.what());
    }
  }
  std::uint64_t seed_or(std::uint64_t fallback) const { return seed ? *seed : fallback; }
};

tokenize::AmountQuantizerConfig amounts_config(const std::string& name) {
  if (name == "desk") return tokenize::AmountQuantizerConfig::desk();
  if (name == "paper") return tokenize::AmountQuantizerConfig::paper();
  throw ConfigError("unknown amount quantizer '" + name + "' (expected desk or paper)");
}

std::vector<corpus::AccountFlow> load_normalized(const fs::path& p) {
  require_input(p);
  return preprocess::normalize_corpus(corpus::load_corpus(p));
}

void add_common(CLI::App* cmd, Common& c, bool with_arch) {
  cmd->add_option("--config", c.config_path, "JSON config with per-stage sections");
  cmd->add_option("--seed", c.seed, "seed for every random draw of the stage");
  cmd->add_option("--out", c.out, "output path");
  if (with_arch) cmd->add_option("--arch", c.arch, "rnn or transformer");
}

// gen-corpus -----------------------------------------------------------------

struct GenCorpus {
  Common c;
  std::optional<std::size_t> accounts, months;

  void run(std::ostream& out) {
    c.load();
    std::size_t n = 2000, m = 2;
    std::uint64_t seed = 1;
    if (auto s = section(c.config, "corpus")) {
      const auto j = json::parse(*s);
      n = j.value("accounts", n);
      m = j.value("months", m);
      seed = j.value("seed", seed);
    }
    if (accounts) n = *accounts;
    if (months) m = *months;
    auto spec = corpus::default_corpus_spec(n, m, c.seed_or(seed));
    const auto flows = corpus::generate_corpus(spec);
    if (c.out.empty()) throw InputError("--out is required");
    corpus::save_corpus(flows, c.out);
    out << "wrote " << corpus::transaction_count(flows) << " transactions for " << flows.size() << " accounts to "
        << c.out << "\n";
  }
};

// normalize ------------------------------------------------------------------

struct Normalize {
  Common c;
  std::string in;

  void run(std::ostream& out) {
    require_input(in);
    if (c.out.empty()) throw InputError("--out is required");
    if (fs::exists(c.out) && fs::equivalent(in, c.out)) throw InputError("--out must differ from --in");
    const auto flows = preprocess::normalize_corpus(corpus::load_corpus(in));
    corpus::save_corpus(flows, c.out);
    out << "normalized " << corpus::transaction_count(flows) << " transactions to " << c.out << "\n";
  }
};

// train-vocab ----------------------------------------------------------------

struct TrainVocab {
  Common c;
  std::string in;
  std::optional<std::size_t> vocab_size;
  std::string amounts = "desk";

  void run(std::ostream& out) {
    c.load();
    tokenize::UnigramOptions opts;
    if (auto s = section(c.config, "tokenizer")) {
      const auto j = json::parse(*s);
      opts.target_size = j.value("vocab_size", opts.target_size);
      opts.max_piece_symbols = j.value("max_piece_symbols", opts.max_piece_symbols);
      amounts = j.value("amounts", amounts);
    }
    if (vocab_size) opts.target_size = *vocab_size;
    const auto flows = load_normalized(in);
    std::vector<std::string> encoded;
    for (const auto& f : flows) {
      for (const auto& m : f.months) {
        for (const auto& t : m.transactions) encoded.push_back(tokenize::encode_wording(t.wording));
      }
    }
    auto vocab = tokenize::train_unigram(encoded, opts);
    tokenize::Tokenizer tok(std::move(vocab), tokenize::AmountQuantizer(amounts_config(amounts)));
    if (c.out.empty()) throw InputError("--out is required");
    tok.save(c.out);
    out << "vocabulary of " << tok.vocab().size() << " entries, " << tok.amounts().bins() << " amount bins, saved to "
        << c.out << "\n";
  }
};

// tokenize -------------------------------------------------------------------

struct Tokenize {
  Common c;
  std::string in, tokenizer_dir, vocab_path, listing, amounts = "desk";

  void run(std::ostream& out) {
    std::optional<tokenize::Tokenizer> tok;
    if (!tokenizer_dir.empty()) {
      tok.emplace(tokenize::Tokenizer::load(tokenizer_dir));
    } else if (!vocab_path.empty()) {
      require_input(vocab_path);
      tok.emplace(tokenize::VocabModel::load(vocab_path), tokenize::AmountQuantizer(amounts_config(amounts)));
    } else {
      throw InputError("either --tokenizer or --vocab is required");
    }
    const auto flows = load_normalized(in);
    std::string jsonl, text;
    for (const auto& f : flows) {
      for (const auto& m : f.months) {
        const auto seq = tok->assemble(std::span<const corpus::Month>(&m, 1), tokenize::NspRole::mono);
        json j;
        j["account_id"] = f.account_id;
        j["month"] = m.key.str();
        j["x"] = seq.x_ids;
        j["a"] = seq.a_ids;
        j["d"] = seq.d_ids;
        j["t"] = seq.t_ids;
        jsonl += j.dump() + "\n";
        text += f.account_id + " " + m.key.str() + "\n" + tok->listing(seq) + "\n";
      }
    }
    if (!c.out.empty()) write_file(c.out, jsonl);
    if (!listing.empty()) write_file(listing, text);
    if (c.out.empty() && listing.empty()) out << text;
  }
};

// pretrain -------------------------------------------------------------------

models::EncoderConfig encoder_config(const Common& c, const tokenize::Tokenizer& tok, models::Arch fallback) {
  auto arch = c.arch.empty() ? fallback : models::parse_arch(c.arch);
  auto cfg = models::EncoderConfig::desk(arch);
  if (auto s = section(c.config, "encoder")) cfg = merged_encoder(cfg, *s, c.arch);
  cfg.vx = tok.vocab().size();
  cfg.va = tok.amounts().table_size();
  cfg.vd = tok.dates().table_size();
  cfg.validate();
  return cfg;
}

struct Pretrain {
  Common c;
  std::string corpus_path, tokenizer_dir;

  void run(std::ostream& out) {
    c.load();
    if (c.out.empty()) throw InputError("--out is required");
    const auto tok = tokenize::Tokenizer::load(tokenizer_dir);
    const auto flows = load_normalized(corpus_path);
    auto pc = pretrain::PretrainConfig{};
    if (auto s = section(c.config, "pretrain")) pc = pretrain::PretrainConfig::from_json(*s);
    pc.seed = c.seed_or(pc.seed);
    const auto cfg = encoder_config(c, tok, models::Arch::transformer);
    const auto split = pretrain::split_accounts(flows.size(), pc.holdout_fraction, pc.seed);
    const auto train = pretrain::select_accounts(flows, split.train);
    const auto held = pretrain::select_accounts(flows, split.heldout);
    fs::create_directories(c.out);
    write_file(fs::path(c.out) / "pretrain_config.json", pc.to_json());

    // Separability check of the data, before any training.
    std::optional<double> oracle;
    std::vector<pretrain::PairExample> held_examples;
    if (!held.empty()) {
      Rng rng = Rng::derive(pc.seed, 0x45564fULL);
      held_examples = pretrain::make_pair_examples(held, tok, pc, rng);
      Rng fit_rng = Rng::derive(pc.seed, 0x4f52ULL);
      const auto fit = pretrain::make_pair_examples(train, tok, pc, fit_rng);
      const auto pos = std::count_if(fit.begin(), fit.end(), [](const auto& e) { return e.label == 1; });
      if (pos > 0 && pos < static_cast<std::ptrdiff_t>(fit.size()) && !held_examples.empty()) {
        oracle = pretrain::nsp_centroid_oracle(fit, held_examples);
      }
    }

    with_precision([&](auto zero) {
      using T = decltype(zero);
      models::Encoder<T> encoder(cfg, pc.seed);
      auto heads = pretrain::PretrainHeads<T>::create(cfg.d, cfg.vx, cfg.va, pc.seed);
      const auto result = pretrain::pretrain_loop(encoder, heads, tok, train, pc, c.out, {});
      json report;
      report["optimizer_steps"] = result.optimizer_steps;
      report["train_accounts"] = train.size();
      report["heldout_accounts"] = held.size();
      if (!held.empty()) {
        const auto& examples = held_examples;
        const auto stats = pretrain::evaluate_pretrain(encoder, heads, tok, examples, pc.batch_size);
        const auto base = pretrain::majority_baseline(train, tok, examples);
        report["heldout_pairs"] = examples.size();
        report["acc_mwm"] = stats.mwm.accuracy();
        report["acc_mam"] = stats.mam.accuracy();
        report["acc_nsp"] = stats.nsp.accuracy();
        report["baseline_mwm"] = base.mwm_accuracy;
        report["baseline_mam"] = base.mam_accuracy;
        report["baseline_nsp"] = base.nsp_accuracy;
        if (oracle) report["oracle_nsp"] = *oracle;
        out << "held-out accuracy: mwm " << stats.mwm.accuracy() << " (baseline " << base.mwm_accuracy << "), mam "
            << stats.mam.accuracy() << " (baseline " << base.mam_accuracy << "), nsp " << stats.nsp.accuracy()
            << "\n";
      }
      write_file(fs::path(c.out) / "pretrain_eval.json", report.dump(1) + "\n");
      return 0;
    });
    out << "pre-trained encoder saved to " << (fs::path(c.out) / "final").string() << "\n";
  }
};

// finetune -------------------------------------------------------------------

evaluate::FinetuneConfig finetune_config(const Common& c) {
  auto fc = evaluate::FinetuneConfig{};
  if (auto s = section(c.config, "finetune")) fc = evaluate::FinetuneConfig::from_json(*s);
  fc.seed = c.seed_or(fc.seed);
  return fc;
}

struct DownstreamData {
  std::vector<corpus::AccountFlow> train, test;
};

DownstreamData split_downstream(std::vector<corpus::AccountFlow> flows, const evaluate::FinetuneConfig& fc) {
  const auto split = pretrain::split_accounts(flows.size(), fc.holdout_fraction, fc.seed);
  return {pretrain::select_accounts(flows, split.train), pretrain::select_accounts(flows, split.heldout)};
}

struct Finetune {
  Common c;
  std::string corpus_path, tokenizer_dir, encoder_dir, task = "categorization", mode = "full";

  void run(std::ostream& out) {
    c.load();
    if (c.out.empty()) throw InputError("--out is required");
    require_input(fs::path(encoder_dir) / "encoder.ckpt");
    const auto fm = evaluate::parse_mode(mode);
    const auto tok = tokenize::Tokenizer::load(tokenizer_dir);
    const auto fc = finetune_config(c);
    auto data = split_downstream(load_normalized(corpus_path), fc);
    fs::create_directories(c.out);

    with_precision([&](auto zero) {
      using T = decltype(zero);
      auto encoder = models::Encoder<T>::load(encoder_dir);
      Rng rng = Rng::derive(fc.seed, 0x4845414cULL);
      evaluate::FinetuneResult result;
      json meta;
      meta["task"] = task;
      meta["mode"] = mode;
      meta["config"] = json::parse(fc.to_json());
      if (task == "categorization") {
        const auto labels = evaluate::LabelSet::from_flows(data.train);
        const auto examples = evaluate::make_categorization_examples(data.train, tok, labels, fc.max_tokens);
        auto head = models::LinearHead<T>::create(encoder.config().d, labels.size(), rng);
        result = evaluate::finetune_categorization(encoder, head, tok, labels, examples, fm, fc);
        evaluate::save_head(head, "head.cat", fs::path(c.out) / "head.ckpt");
        meta["labels"] = labels.names();
        meta["train_sequences"] = examples.size();
      } else if (task == "risk") {
        auto all = evaluate::make_risk_examples(data.train, tok, fc.max_tokens);
        const auto examples = evaluate::balance(all, rng);
        auto head = models::LinearHead<T>::create(encoder.config().d, 2, rng);
        result = evaluate::finetune_risk(encoder, head, tok, examples, fm, fc);
        evaluate::save_head(head, "head.risk", fs::path(c.out) / "head.ckpt");
        meta["train_sequences"] = examples.size();
      } else {
        throw ConfigError("unknown task '" + task + "' (expected categorization or risk)");
      }
      encoder.save(fs::path(c.out) / "encoder");
      meta["epoch_loss"] = result.epoch_loss;
      meta["optimizer_steps"] = result.optimizer_steps;
      write_file(fs::path(c.out) / "finetune.json", meta.dump(1) + "\n");
      return 0;
    });
    out << task << " head (" << mode << ") saved to " << c.out << "\n";
  }
};

// evaluate -------------------------------------------------------------------

struct Evaluate {
  Common c;
  std::string corpus_path, tokenizer_dir;
  std::vector<std::string> models_dirs;

  void run(std::ostream& out) {
    c.load();
    if (c.out.empty()) throw InputError("--out is required");
    if (models_dirs.empty()) throw InputError("at least one --model directory is required");
    const auto tok = tokenize::Tokenizer::load(tokenizer_dir);
    const auto all_flows = load_normalized(corpus_path);
    std::vector<evaluate::MetricReport> reports;
    std::string confusion;
    bool baseline_done = false;
    for (const auto& dir : models_dirs) {
      const auto meta = json::parse(read_file(fs::path(dir) / "finetune.json"));
      const auto fc = evaluate::FinetuneConfig::from_json(meta.at("config").dump());
      const auto data = split_downstream(all_flows, fc);
      const std::string task = meta.at("task");
      const std::string mode = meta.at("mode");
      with_precision([&](auto zero) {
        using T = decltype(zero);
        const auto encoder = models::Encoder<T>::load(fs::path(dir) / "encoder");
        if (task == "categorization") {
          const evaluate::LabelSet labels(meta.at("labels").get<std::vector<std::string>>());
          const auto head = evaluate::load_head<T>(fs::path(dir) / "head.ckpt", "head.cat");
          const auto test = evaluate::make_categorization_examples(data.test, tok, labels, fc.max_tokens);
          const auto pred = evaluate::predict_categorization(encoder, head, tok, test, fc.batch_size);
          const auto [p, t] = evaluate::flatten_labeled(test, pred);
          auto r = evaluate::classification_report(p, t, labels.names());
          r.task = task;
          r.mode = mode;
          confusion += "# " + task + " " + mode + "\n" + r.confusion->csv(labels.names());
          if (!baseline_done) {
            const auto train = evaluate::make_categorization_examples(data.train, tok, labels, fc.max_tokens);
            const auto [label, acc] = evaluate::majority_class(train, test);
            std::vector<int> maj(t.size(), label);
            auto b = evaluate::classification_report(maj, t, labels.names());
            b.task = task;
            b.mode = "majority";
            reports.push_back(std::move(b));
            baseline_done = true;
          }
          reports.push_back(std::move(r));
        } else {
          const auto head = evaluate::load_head<T>(fs::path(dir) / "head.ckpt", "head.risk");
          Rng rng = Rng::derive(fc.seed, 0x54455354ULL);
          const auto test = evaluate::balance(evaluate::make_risk_examples(data.test, tok, fc.max_tokens), rng);
          const auto scores = evaluate::predict_risk(encoder, head, tok, test, fc.batch_size);
          std::vector<int> truth;
          for (const auto& e : test) truth.push_back(e.label);
          auto r = evaluate::binary_report(scores.predicted, scores.score, truth);
          r.task = task;
          r.mode = mode;
          reports.push_back(std::move(r));
        }
        return 0;
      });
    }
    fs::create_directories(c.out);
    write_file(fs::path(c.out) / "report.json", evaluate::report_json(reports));
    if (!confusion.empty()) write_file(fs::path(c.out) / "confusion.csv", confusion);
    out << evaluate::report_table(reports);
  }
};

// bench ----------------------------------------------------------------------

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      v.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw ConfigError("not a number in list: '" + item + "'");
    }
  }
  return v;
}

struct Bench {
  Common c;
  std::string lengths = "64,128,256,512,1024", lanes = "1";
  std::size_t batch = 1, repeats = 3;

  void run(std::ostream& out) {
    c.load();
    if (c.out.empty()) throw InputError("--out is required");
    std::vector<models::Arch> archs;
    if (c.arch.empty() || c.arch == "both") {
      archs = {models::Arch::rnn, models::Arch::transformer};
    } else {
      archs = {models::parse_arch(c.arch)};
    }
    bench::MeasureOptions opts;
    opts.repeats = repeats;
    opts.seed = c.seed_or(1);
    std::vector<bench::ForwardMeasurement> rows;
    with_precision([&](auto zero) {
      using T = decltype(zero);
      for (auto arch : archs) {
        auto cfg = models::EncoderConfig::desk(arch);
        if (auto s = section(c.config, "encoder")) cfg = merged_encoder(cfg, *s, models::arch_name(arch));
        cfg.dropout = 0.0;
        const models::Encoder<T> encoder(cfg, opts.seed);
        for (auto n_lanes : parse_list(lanes)) {
          opts.lanes = n_lanes;
          for (auto n : parse_list(lengths)) rows.push_back(bench::measure_forward(encoder, n, batch, opts));
        }
      }
      return 0;
    });
    const auto report = bench::scaling_report(rows);
    write_file(c.out, report.csv);
    write_file(fs::path(c.out).replace_extension(".fits.json"), bench::fits_json(report));
    for (const auto& [model, f] : report.memory_fits) {
      out << model << " activation-memory slope " << f.slope << " (R^2 " << f.r2 << ")\n";
    }
  }
};

// count-params ---------------------------------------------------------------

struct CountParams {
  Common c;
  std::string preset = "desk";
  std::optional<std::size_t> d, h, L, J, vx, va, vd;

  void run(std::ostream& out) {
    c.load();
    auto arch = c.arch.empty() ? models::Arch::transformer : models::parse_arch(c.arch);
    if (preset != "desk" && preset != "paper") throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");
    auto cfg = preset == "paper" ? models::EncoderConfig::paper(arch) : models::EncoderConfig::desk(arch);
    if (auto s = section(c.config, "encoder")) cfg = merged_encoder(cfg, *s, c.arch);
    if (d) cfg.d = *d;
    if (h) cfg.h = *h;
    if (L) cfg.L = *L;
    if (J) cfg.J = *J;
    if (vx) cfg.vx = *vx;
    if (va) cfg.va = *va;
    if (vd) cfg.vd = *vd;
    cfg.validate();
    out << count_params_text(cfg);
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Banking transaction flow encoders: corpus, tokenization, pre-training, evaluation"};
  app.require_subcommand(1);

  GenCorpus gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "generate a synthetic labelled corpus (JSON lines)");
  add_common(gen_cmd, gen.c, false);
  gen_cmd->add_option("--accounts", gen.accounts, "number of accounts");
  gen_cmd->add_option("--months", gen.months, "months per account");

  Normalize norm;
  auto* norm_cmd = app.add_subcommand("normalize", "normalize wordings of a corpus file");
  add_common(norm_cmd, norm.c, false);
  norm_cmd->add_option("--in", norm.in, "input corpus")->required();

  TrainVocab tv;
  auto* tv_cmd = app.add_subcommand("train-vocab", "train the wording vocabulary and amount quantizer");
  add_common(tv_cmd, tv.c, false);
  tv_cmd->add_option("--in", tv.in, "corpus")->required();
  tv_cmd->add_option("--vocab-size", tv.vocab_size, "target vocabulary size");
  tv_cmd->add_option("--amounts", tv.amounts, "amount quantizer: desk or paper");

  Tokenize tk;
  auto* tk_cmd = app.add_subcommand("tokenize", "turn a corpus into the four token streams");
  add_common(tk_cmd, tk.c, false);
  tk_cmd->add_option("--in", tk.in, "corpus")->required();
  tk_cmd->add_option("--tokenizer", tk.tokenizer_dir, "directory written by train-vocab");
  tk_cmd->add_option("--vocab", tk.vocab_path, "vocabulary TSV (with --amounts)");
  tk_cmd->add_option("--amounts", tk.amounts, "amount quantizer used with --vocab");
  tk_cmd->add_option("--listing", tk.listing, "write the human-readable stream listing here");

  Pretrain pt;
  auto* pt_cmd = app.add_subcommand("pretrain", "self-supervised pre-training (MWM, MAM, NSP)");
  add_common(pt_cmd, pt.c, true);
  pt_cmd->add_option("--corpus", pt.corpus_path, "corpus")->required();
  pt_cmd->add_option("--tokenizer", pt.tokenizer_dir, "tokenizer directory")->required();

  Finetune ft;
  auto* ft_cmd = app.add_subcommand("finetune", "train a downstream head (frozen or full)");
  add_common(ft_cmd, ft.c, false);
  ft_cmd->add_option("--corpus", ft.corpus_path, "labelled corpus")->required();
  ft_cmd->add_option("--tokenizer", ft.tokenizer_dir, "tokenizer directory")->required();
  ft_cmd->add_option("--encoder", ft.encoder_dir, "pre-trained encoder directory")->required();
  ft_cmd->add_option("--task", ft.task, "categorization or risk");
  ft_cmd->add_option("--mode", ft.mode, "frozen or full");

  Evaluate ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "score fine-tuned models on held-out accounts");
  add_common(ev_cmd, ev.c, false);
  ev_cmd->add_option("--corpus", ev.corpus_path, "labelled corpus")->required();
  ev_cmd->add_option("--tokenizer", ev.tokenizer_dir, "tokenizer directory")->required();
  ev_cmd->add_option("--model", ev.models_dirs, "finetune output directory (repeatable)")->required();

  Bench bn;
  auto* bn_cmd = app.add_subcommand("bench", "forward-pass time and activation memory versus length");
  add_common(bn_cmd, bn.c, true);
  bn_cmd->add_option("--lengths", bn.lengths, "comma-separated sequence lengths");
  bn_cmd->add_option("--lanes", bn.lanes, "comma-separated lane counts");
  bn_cmd->add_option("--batch", bn.batch, "sequences per forward pass");
  bn_cmd->add_option("--repeats", bn.repeats, "timed repetitions after one warmup");

  CountParams cp;
  auto* cp_cmd = app.add_subcommand("count-params", "parameter breakdown of an encoder configuration");
  cp_cmd->set_help_flag("--help", "print this help message and exit");
  add_common(cp_cmd, cp.c, true);
  cp_cmd->add_option("--preset", cp.preset, "starting configuration: desk or paper");
  cp_cmd->add_option("--d", cp.d, "model width");
  cp_cmd->add_option("--h", cp.h, "inner width");
  cp_cmd->add_option("--L", cp.L, "layers");
  cp_cmd->add_option("--J", cp.J, "attention heads");
  cp_cmd->add_option("--vx", cp.vx, "wording table size");
  cp_cmd->add_option("--va", cp.va, "amount table size");
  cp_cmd->add_option("--vd", cp.vd, "date table size");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (stage == "gen-corpus") gen.run(out);
    else if (stage == "normalize") norm.run(out);
    else if (stage == "train-vocab") tv.run(out);
    else if (stage == "tokenize") tk.run(out);
    else if (stage == "pretrain") pt.run(out);
    else if (stage == "finetune") ft.run(out);
    else if (stage == "evaluate") ev.run(out);
    else if (stage == "bench") bn.run(out);
    else if (stage == "count-params") cp.run(out);
  } catch (const std::exception& e) {
    err << stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace btf::cli
