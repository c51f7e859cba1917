#include "btf/models/config.hpp"

#include <cmath>
#include <map>

#include <json.hpp>

#include "btf/common/error.hpp"

namespace btf::models {

std::string arch_name(Arch arch) { return arch == Arch::rnn ? "rnn" : "transformer"; }

Arch parse_arch(const std::string& name) {
  if (name == "rnn") return Arch::rnn;
  if (name == "transformer") return Arch::transformer;
  throw ConfigError("unknown architecture '" + name + "' (expected rnn or transformer)");
}

EncoderConfig EncoderConfig::paper(Arch arch) {
  EncoderConfig c;
  c.arch = arch;
  c.d = 768;
  c.h = 3072;
  c.L = arch == Arch::rnn ? 2 : 12;
  c.J = 12;
  c.vx = 7000;
  c.va = 2500;
  c.vd = 30;
  return c;
}

EncoderConfig EncoderConfig::desk(Arch arch) {
  EncoderConfig c;
  c.arch = arch;
  return c;
}

void EncoderConfig::validate() const {
  if (d == 0 || L == 0) throw ConfigError("encoder config: d and L must be > 0");
  if (!(h > d)) throw ConfigError("encoder config: h must exceed d");
  if (arch == Arch::transformer && (J == 0 || d % J != 0)) {
    throw ConfigError("encoder config: d must be divisible by J");
  }
  if (!(ln_eps > 0.0)) throw ConfigError("encoder config: layer-norm eps must be > 0");
  if (vx == 0 || va == 0 || vd == 0) throw ConfigError("encoder config: empty vocabulary table");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder config: dropout must lie in [0, 1)");
}

std::string EncoderConfig::to_json() const {
  nlohmann::ordered_json j;
  j["arch"] = arch_name(arch);
  j["d"] = d;
  j["h"] = h;
  j["L"] = L;
  j["J"] = J;
  j["vx"] = vx;
  j["va"] = va;
  j["vd"] = vd;
  j["dropout"] = dropout;
  j["ln_eps"] = ln_eps;
  j["rnn_attention"] = rnn_attention;
  return j.dump(1) + "\n";
}

EncoderConfig EncoderConfig::from_json(const std::string& text) {
  EncoderConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.arch = parse_arch(j.at("arch").get<std::string>());
    c.d = j.at("d").get<std::size_t>();
    c.h = j.at("h").get<std::size_t>();
    c.L = j.at("L").get<std::size_t>();
    c.J = j.value("J", std::size_t{1});
    c.vx = j.at("vx").get<std::size_t>();
    c.va = j.at("va").get<std::size_t>();
    c.vd = j.at("vd").get<std::size_t>();
    c.dropout = j.value("dropout", 0.1);
    c.ln_eps = j.value("ln_eps", 1e-5);
    c.rnn_attention = j.value("rnn_attention", true);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t p_emb(std::uint64_t d, std::uint64_t vx, std::uint64_t va, std::uint64_t vd) {
  return d * (vx + va + vd + 2);
}

std::uint64_t p_rnn(std::uint64_t d, std::uint64_t h, std::uint64_t L) {
  return 2 * L * (9 * d * h + 8 * h + 2 * d) + L + 1;
}

std::uint64_t p_tf(std::uint64_t d, std::uint64_t h, std::uint64_t L) {
  return L * (4 * d * d + 2 * d * h + 9 * d + h);
}

std::vector<ParamSpec> param_manifest(const EncoderConfig& c) {
  c.validate();
  const std::size_t d = c.d, h = c.h;
  std::vector<ParamSpec> m = {
      {"emb.x", {c.vx, d}}, {"emb.a", {c.va, d}}, {"emb.d", {c.vd, d}}, {"emb.t", {2, d}},
  };
  for (std::size_t l = 0; l < c.L; ++l) {
    if (c.arch == Arch::rnn) {
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string p = "rnn.l" + std::to_string(l) + "." + dir + ".";
        m.push_back({p + "wx", {d, 4 * h}});
        m.push_back({p + "wr", {d, 4 * h}});
        m.push_back({p + "bx", {4 * h}});
        m.push_back({p + "br", {4 * h}});
        m.push_back({p + "proj", {h, d}});
        m.push_back({p + "ln_g", {d}});
        m.push_back({p + "ln_b", {d}});
      }
    } else {
      const std::string p = "tf.l" + std::to_string(l) + ".";
      for (const char* w : {"q", "k", "v", "o"}) {
        m.push_back({p + "w" + w, {d, d}});
        m.push_back({p + "b" + w, {d}});
      }
      m.push_back({p + "w1", {d, h}});
      m.push_back({p + "b1", {h}});
      m.push_back({p + "w2", {h, d}});
      m.push_back({p + "b2", {d}});
      m.push_back({p + "ln1_g", {d}});
      m.push_back({p + "ln1_b", {d}});
      m.push_back({p + "ln2_g", {d}});
      m.push_back({p + "ln2_b", {d}});
    }
  }
  if (c.arch == Arch::rnn) m.push_back({"rnn.mix", {c.L + 1}});
  return m;
}

ParamCount count_params(const EncoderConfig& config) {
  ParamCount pc;
  std::map<std::string, std::uint64_t> groups;
  std::vector<std::string> order;
  for (const auto& spec : param_manifest(config)) {
    const std::uint64_t n = numeric::numel_of(spec.shape);
    (spec.name.rfind("emb.", 0) == 0 ? pc.embedding : pc.encoder) += n;
    const auto cut = spec.name.find('.', spec.name.find('.') + 1);
    const std::string group = spec.name.substr(0, cut);
    if (!groups.count(group)) order.push_back(group);
    groups[group] += n;
  }
  pc.total = pc.embedding + pc.encoder;
  for (const auto& g : order) pc.components.emplace_back(g, groups[g]);
  return pc;
}

ParamCount formula_params(const EncoderConfig& c) {
  ParamCount pc;
  pc.embedding = p_emb(c.d, c.vx, c.va, c.vd);
  pc.encoder = c.arch == Arch::rnn ? p_rnn(c.d, c.h, c.L) : p_tf(c.d, c.h, c.L);
  pc.total = pc.embedding + pc.encoder;
  pc.components = {{"embedding", pc.embedding}, {arch_name(c.arch), pc.encoder}};
  return pc;
}

std::string display_millions(std::uint64_t count) {
  return std::to_string(static_cast<std::uint64_t>(std::llround(static_cast<double>(count) / 1e6))) + "M";
}

}  // namespace btf::models
