#include "btf/evaluate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "btf/common/error.hpp"

namespace btf::evaluate {

namespace {

Interval clipped(double centre, double half) {
  return Interval{std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

void check_binary(std::span<const int> labels) {
  for (int l : labels) {
    if (l != 0 && l != 1) throw InputError("binary labels must be 0 or 1, got " + std::to_string(l));
  }
}

}  // namespace

Interval normal_ci(double p_hat, std::size_t n) {
  if (n == 0) throw InputError("normal_ci: n must be > 0");
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw InputError("normal_ci: proportion outside [0, 1]");
  return clipped(p_hat, kZ95 * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n)));
}

double hanley_se(double auc, std::size_t n_pos, std::size_t n_neg) {
  if (!(auc >= 0.0 && auc <= 1.0)) throw InputError("hanley_auc_ci: auc must lie in [0, 1]");
  if (n_pos == 0 || n_neg == 0) throw InputError("hanley_auc_ci: both classes need at least one case");
  const double q1 = auc / (2.0 - auc);
  const double q2 = 2.0 * auc * auc / (1.0 + auc);
  const double a2 = auc * auc;
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  const double var = (auc * (1.0 - auc) + (np - 1.0) * (q1 - a2) + (nn - 1.0) * (q2 - a2)) / (np * nn);
  return std::sqrt(std::max(var, 0.0));  // exactly 0 at auc 0 or 1
}

Interval hanley_auc_ci(double auc, std::size_t n_pos, std::size_t n_neg) {
  return clipped(auc, kZ95 * hanley_se(auc, n_pos, n_neg));
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("roc_auc: scores and labels differ in length");
  check_binary(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks over tie groups.
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum_pos += mid;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("roc_auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::vector<std::size_t> balance_downsample(std::span<const int> labels, Rng& rng) {
  check_binary(labels);
  std::vector<std::size_t> cls[2];
  for (std::size_t i = 0; i < labels.size(); ++i) cls[labels[i]].push_back(i);
  if (cls[0].empty() || cls[1].empty()) throw InputError("balance_downsample: a class is empty");
  const std::size_t keep = std::min(cls[0].size(), cls[1].size());
  std::vector<std::size_t> out;
  for (auto& c : cls) {
    if (c.size() > keep) {
      rng.shuffle(c);
      c.resize(keep);
    }
    out.insert(out.end(), c.begin(), c.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw InputError("accuracy: length mismatch");
  if (truth.empty()) throw InputError("accuracy: no cases");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw InputError("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::span<const int> predicted, std::span<const int> truth, std::size_t classes)
    : ConfusionMatrix(classes) {
  if (predicted.size() != truth.size()) throw InputError("confusion matrix: length mismatch");
  for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= k_ ||
      static_cast<std::size_t>(predicted) >= k_) {
    throw InputError("confusion matrix: class id out of range");
  }
  ++counts_[static_cast<std::size_t>(truth) * k_ + static_cast<std::size_t>(predicted)];
  ++total_;
}

double ConfusionMatrix::accuracy() const {
  if (total_ == 0) return 0.0;
  std::size_t diag = 0;
  for (std::size_t c = 0; c < k_; ++c) diag += at(c, c);
  return static_cast<double>(diag) / static_cast<double>(total_);
}

double ConfusionMatrix::macro_recall() const {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k_; ++c) {
    std::size_t row = 0;
    for (std::size_t p = 0; p < k_; ++p) row += at(c, p);
    if (row == 0) continue;
    ++present;
    sum += static_cast<double>(at(c, c)) / static_cast<double>(row);
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

double ConfusionMatrix::macro_f1() const {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k_; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t p = 0; p < k_; ++p) {
      row += at(c, p);
      col += at(p, c);
    }
    if (row == 0) continue;
    ++present;
    const double tp = static_cast<double>(at(c, c));
    if (tp > 0) sum += 2.0 * tp / static_cast<double>(row + col);
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

std::string ConfusionMatrix::csv(std::span<const std::string> names) const {
  if (names.size() != k_) throw InputError("confusion matrix: expected " + std::to_string(k_) + " class names");
  std::string out = "truth\\predicted";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t c = 0; c < k_; ++c) {
    out += names[c];
    for (std::size_t p = 0; p < k_; ++p) out += "," + std::to_string(at(c, p));
    out += '\n';
  }
  return out;
}

MetricReport classification_report(std::span<const int> predicted, std::span<const int> truth,
                                   std::span<const std::string> class_names) {
  if (truth.empty()) throw InputError("classification report: no cases");
  ConfusionMatrix cm(predicted, truth, class_names.size());
  MetricReport r;
  r.n = truth.size();
  auto metric = [&](double v) { return Metric{v, normal_ci(v, r.n)}; };
  r.accuracy = metric(cm.accuracy());
  r.recall = metric(cm.macro_recall());
  r.f1 = metric(cm.macro_f1());
  r.class_names.assign(class_names.begin(), class_names.end());
  r.confusion = std::move(cm);
  return r;
}

MetricReport binary_report(std::span<const int> predicted, std::span<const double> scores,
                           std::span<const int> truth) {
  const std::vector<std::string> names = {"0", "1"};
  auto r = classification_report(predicted, truth, names);
  const double auc = roc_auc(scores, truth);
  std::size_t n_pos = 0;
  for (int l : truth) n_pos += l == 1 ? 1 : 0;
  r.n_pos = n_pos;
  r.n_neg = truth.size() - n_pos;
  r.roc_auc = Metric{auc, hanley_auc_ci(auc, r.n_pos, r.n_neg)};  // point interval at 0 or 1
  return r;
}

std::string report_json(std::span<const MetricReport> reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  auto metric = [](const Metric& m) {
    nlohmann::ordered_json j;
    j["value"] = m.value;
    j["lo"] = m.ci.lo;
    j["hi"] = m.ci.hi;
    return j;
  };
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["task"] = r.task;
    j["mode"] = r.mode;
    j["n"] = r.n;
    j["accuracy"] = metric(r.accuracy);
    j["recall_macro"] = metric(r.recall);
    j["f1_macro"] = metric(r.f1);
    if (r.roc_auc) {
      j["roc_auc"] = metric(*r.roc_auc);
      j["n_pos"] = r.n_pos;
      j["n_neg"] = r.n_neg;
    }
    if (r.confusion) {
      j["classes"] = r.class_names;
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (std::size_t c = 0; c < r.confusion->classes(); ++c) {
        std::vector<std::size_t> row;
        for (std::size_t p = 0; p < r.confusion->classes(); ++p) row.push_back(r.confusion->at(c, p));
        rows.push_back(row);
      }
      j["confusion"] = rows;
    }
    arr.push_back(j);
  }
  return arr.dump(1) + "\n";
}

std::string report_table(std::span<const MetricReport> reports) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %-10s %-14s %-14s %-14s %-14s\n", "task", "mode", "accuracy",
                "recall", "f1", "roc_auc");
  out += buf;
  auto cell = [](const Metric& m) {
    char c[32];
    std::snprintf(c, sizeof c, "%.1f +/- %.1f", 100.0 * m.value, 100.0 * m.ci.half_width());
    return std::string(c);
  };
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-16s %-10s %-14s %-14s %-14s %-14s\n", r.task.c_str(), r.mode.c_str(),
                  cell(r.accuracy).c_str(), cell(r.recall).c_str(), cell(r.f1).c_str(),
                  r.roc_auc ? cell(*r.roc_auc).c_str() : "-");
    out += buf;
  }
  return out;
}

}  // namespace btf::evaluate
