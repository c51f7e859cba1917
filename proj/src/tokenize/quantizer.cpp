#include "btf/tokenize/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "btf/common/error.hpp"
#include "btf/common/format.hpp"

namespace btf::tokenize {

namespace {

ControlIds controls_after(std::size_t bins) {
  const int b = static_cast<int>(bins);
  return ControlIds{b, b + 1, b + 2, b + 3, b + 4};
}

}  // namespace

AmountQuantizerConfig AmountQuantizerConfig::paper() { return {}; }

AmountQuantizerConfig AmountQuantizerConfig::desk() {
  AmountQuantizerConfig c;
  c.lin_steps = 125;
  c.exp_steps_lo = 62;
  c.exp_steps_hi = 63;
  return c;
}

void AmountQuantizerConfig::validate() const {
  if (!(std::isfinite(lin_lo) && std::isfinite(lin_hi) && std::isfinite(sat))) {
    throw ConfigError("amount quantizer: non-finite bound");
  }
  if (!(-sat < lin_lo && lin_lo < 0.0 && 0.0 < lin_hi && lin_hi < sat)) {
    throw ConfigError("amount quantizer: need -sat < lin_lo < 0 < lin_hi < sat");
  }
  if (lin_steps == 0 || exp_steps_lo == 0 || exp_steps_hi == 0) {
    throw ConfigError("amount quantizer: every zone needs at least one step");
  }
}

AmountQuantizer::AmountQuantizer(const AmountQuantizerConfig& config) : config_(config) {
  config_.validate();
  const auto& c = config_;
  const double lo_mag = -c.lin_lo;
  edges_.reserve(c.exp_steps_lo + c.lin_steps + c.exp_steps_hi + 1);
  for (std::size_t k = 0; k < c.exp_steps_lo; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(c.exp_steps_lo);
    edges_.push_back(k == 0 ? -c.sat : -c.sat * std::pow(lo_mag / c.sat, t));
  }
  const double width = (c.lin_hi - c.lin_lo) / static_cast<double>(c.lin_steps);
  for (std::size_t j = 0; j < c.lin_steps; ++j) {
    edges_.push_back(c.lin_lo + static_cast<double>(j) * width);
  }
  for (std::size_t k = 0; k < c.exp_steps_hi; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(c.exp_steps_hi);
    edges_.push_back(k == 0 ? c.lin_hi : c.lin_hi * std::pow(c.sat / c.lin_hi, t));
  }
  edges_.push_back(c.sat);
  for (std::size_t k = 1; k < edges_.size(); ++k) {
    if (!(edges_[k - 1] < edges_[k])) throw ConfigError("amount quantizer: edges not increasing");
  }
  control_ = controls_after(bins());
}

int AmountQuantizer::quantize(double euros) const {
  if (std::isnan(euros)) throw InputError("quantize_amount: NaN amount");
  const int last = static_cast<int>(bins()) - 1;
  if (euros <= edges_.front()) return 0;
  if (euros >= edges_.back()) return last;
  if (euros == config_.lin_hi) return static_cast<int>(config_.exp_steps_lo + config_.lin_steps) - 1;
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), euros);
  return static_cast<int>(it - edges_.begin()) - 1;
}

int AmountQuantizer::quantize_cents(std::int64_t cents) const {
  return quantize(static_cast<double>(cents) / 100.0);
}

double AmountQuantizer::dequantize(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= bins()) {
    throw DomainError("dequantize_amount: id " + std::to_string(id) + " is not a quantizer bin");
  }
  const auto k = static_cast<std::size_t>(id);
  return 0.5 * (edges_[k] + edges_[k + 1]);
}

std::string AmountQuantizer::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "btf-amount-quantizer";
  j["version"] = 1;
  j["lin_lo"] = format_exact(config_.lin_lo);
  j["lin_hi"] = format_exact(config_.lin_hi);
  j["lin_steps"] = config_.lin_steps;
  j["exp_steps_lo"] = config_.exp_steps_lo;
  j["exp_steps_hi"] = config_.exp_steps_hi;
  j["sat"] = format_exact(config_.sat);
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (double e : edges_) edges.push_back(format_exact(e));
  return j.dump(1) + "\n";
}

AmountQuantizer AmountQuantizer::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("amount quantizer: ") + e.what());
  }
  AmountQuantizer q;
  try {
    if (j.at("format") != "btf-amount-quantizer" || j.at("version") != 1) {
      throw ParseError(0, "amount quantizer: unsupported format");
    }
    AmountQuantizerConfig c;
    c.lin_lo = parse_double(j.at("lin_lo").get<std::string>());
    c.lin_hi = parse_double(j.at("lin_hi").get<std::string>());
    c.lin_steps = j.at("lin_steps").get<std::size_t>();
    c.exp_steps_lo = j.at("exp_steps_lo").get<std::size_t>();
    c.exp_steps_hi = j.at("exp_steps_hi").get<std::size_t>();
    c.sat = parse_double(j.at("sat").get<std::string>());
    q = AmountQuantizer(c);
    const auto& edges = j.at("edges");
    if (edges.size() != q.edges_.size()) throw ParseError(0, "amount quantizer: edge count mismatch");
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (parse_double(edges[k].get<std::string>()) != q.edges_[k]) {
        throw ParseError(0, "amount quantizer: edge " + std::to_string(k) + " differs from its zone parameters");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("amount quantizer: ") + e.what());
  } catch (const InputError& e) {
    throw ParseError(0, std::string("amount quantizer: ") + e.what());
  }
  return q;
}

void AmountQuantizer::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << to_json();
}

AmountQuantizer AmountQuantizer::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

DateQuantizer::DateQuantizer(std::size_t steps) : steps_(steps), control_(controls_after(steps)) {
  if (steps == 0) throw ConfigError("date quantizer: steps must be > 0");
}

int DateQuantizer::quantize(int day, int days_in_month) const {
  if (days_in_month < 28 || days_in_month > 31) {
    throw InputError("quantize_date: days_in_month " + std::to_string(days_in_month) + " not in 28..31");
  }
  if (day < 1 || day > days_in_month) {
    throw InputError("quantize_date: day " + std::to_string(day) + " outside 1.." +
                     std::to_string(days_in_month));
  }
  const auto s = static_cast<long>(steps_);
  return static_cast<int>(std::min(static_cast<long>(day) * s / days_in_month, s - 1));
}

}  // namespace btf::tokenize
