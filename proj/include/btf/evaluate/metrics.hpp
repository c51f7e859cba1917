#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btf/common/rng.hpp"

namespace btf::evaluate {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double half_width() const noexcept { return 0.5 * (hi - lo); }
  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

inline constexpr double kZ95 = 1.96;

// p_hat +/- 1.96 sqrt(p_hat (1 - p_hat) / n), clipped to [0, 1]. The normal
// approximation is only trustworthy for n >= 30; smaller n is accepted.
Interval normal_ci(double p_hat, std::size_t n);

// Hanley-McNeil standard error of a ROC-AUC estimate and the matching
// 95% interval clipped to [0, 1].
double hanley_se(double auc, std::size_t n_pos, std::size_t n_neg);
Interval hanley_auc_ci(double auc, std::size_t n_pos, std::size_t n_neg);

// Mann-Whitney U / (n_pos n_neg), ties counted 1/2. labels are 0/1.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Indices of a class-balanced subset: the larger class is subsampled without
// replacement to the size of the smaller one. Returned in ascending order.
std::vector<std::size_t> balance_downsample(std::span<const int> labels, Rng& rng);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  ConfusionMatrix(std::span<const int> predicted, std::span<const int> truth, std::size_t classes);

  void add(int truth, int predicted);
  std::size_t classes() const noexcept { return k_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  std::size_t total() const noexcept { return total_; }

  double accuracy() const;
  // Macro averages over classes that occur in the truth column; a class that
  // is never predicted contributes precision 0.
  double macro_recall() const;
  double macro_f1() const;

  // Header "truth\predicted,<names...>", then one row per true class.
  std::string csv(std::span<const std::string> names) const;

 private:
  std::size_t k_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

struct Metric {
  double value = 0.0;
  Interval ci;
};

struct MetricReport {
  std::string task;
  std::string mode;
  std::size_t n = 0;
  Metric accuracy, recall, f1;
  std::optional<Metric> roc_auc;
  std::size_t n_pos = 0, n_neg = 0;  // binary reports only
  std::optional<ConfusionMatrix> confusion;
  std::vector<std::string> class_names;
};

// Accuracy, macro recall and macro F1 with normal intervals over n.
MetricReport classification_report(std::span<const int> predicted, std::span<const int> truth,
                                   std::span<const std::string> class_names);
// Adds ROC-AUC with the Hanley-McNeil interval.
MetricReport binary_report(std::span<const int> predicted, std::span<const double> scores,
                           std::span<const int> truth);

std::string report_json(std::span<const MetricReport> reports);
// Summary lines "task mode accuracy recall f1 auc" with +/- half-widths in points.
std::string report_table(std::span<const MetricReport> reports);

}  // namespace btf::evaluate
