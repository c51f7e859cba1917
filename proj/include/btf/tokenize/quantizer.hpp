#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "btf/tokenize/vocab.hpp"

namespace btf::tokenize {

struct AmountQuantizerConfig {
  double lin_lo = -1750.0;        // euros
  double lin_hi = 2760.0;
  std::size_t lin_steps = 1250;
  std::size_t exp_steps_lo = 625;  // debit side
  std::size_t exp_steps_hi = 625;  // credit side
  double sat = 100000.0;

  static AmountQuantizerConfig paper();
  // 125 linear bins, 62 + 63 exponential bins: 250 bins, 255 ids.
  static AmountQuantizerConfig desk();
  void validate() const;
  bool operator==(const AmountQuantizerConfig&) const = default;
};

// Piecewise quantizer: geometric bins on [-sat, lin_lo], uniform bins on
// [lin_lo, lin_hi], geometric bins on [lin_hi, sat]. Bins are half-open
// [e_k, e_{k+1}) except the last linear bin, which also takes lin_hi, and the
// outermost bins, which absorb everything beyond -sat / +sat.
// Bin ids are 0..bins-1; control ids follow as bins + {PAD, BOS, EOS, SEP, MASK}.
class AmountQuantizer {
 public:
  AmountQuantizer() : AmountQuantizer(AmountQuantizerConfig::paper()) {}
  explicit AmountQuantizer(const AmountQuantizerConfig& config);

  const AmountQuantizerConfig& config() const noexcept { return config_; }
  std::size_t bins() const noexcept { return edges_.size() - 1; }
  std::size_t table_size() const noexcept { return bins() + kControlTokens.size(); }
  const std::vector<double>& edges() const noexcept { return edges_; }
  const ControlIds& control() const noexcept { return control_; }
  std::size_t first_linear_bin() const noexcept { return config_.exp_steps_lo; }

  int quantize(double euros) const;
  int quantize_cents(std::int64_t cents) const;
  double dequantize(int id) const;

  // JSON with zone parameters and every edge as an exact decimal string.
  std::string to_json() const;
  static AmountQuantizer from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static AmountQuantizer load(const std::filesystem::path& path);

  bool operator==(const AmountQuantizer& other) const { return config_ == other.config_; }

 private:
  AmountQuantizerConfig config_;
  std::vector<double> edges_;
  ControlIds control_;
};

// Day-of-month quantizer: id = min(floor(30 * day / days_in_month), 29).
class DateQuantizer {
 public:
  explicit DateQuantizer(std::size_t steps = 30);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t table_size() const noexcept { return steps_ + kControlTokens.size(); }
  const ControlIds& control() const noexcept { return control_; }

  int quantize(int day, int days_in_month) const;

 private:
  std::size_t steps_;
  ControlIds control_;
};

}  // namespace btf::tokenize
