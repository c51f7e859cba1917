#include "btf/pretrain/loss.hpp"

#include <cmath>

#include "btf/common/error.hpp"
#include "btf/numeric/checkpoint.hpp"
#include "btf/numeric/ops.hpp"

namespace btf::pretrain {

template <typename T>
PretrainHeads<T> PretrainHeads<T>::create(std::size_t d, std::size_t vx, std::size_t va, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0x4845414453ULL);
  PretrainHeads h;
  h.mwm = models::LinearHead<T>::create(d, vx, rng);
  h.mam = models::LinearHead<T>::create(d, va, rng);
  h.nsp = models::LinearHead<T>::create(d, 2, rng);
  return h;
}

template <typename T>
numeric::ParamList<T> PretrainHeads<T>::params() const {
  numeric::ParamList<T> list;
  mwm.append_params(list, "head.mwm");
  mam.append_params(list, "head.mam");
  nsp.append_params(list, "head.nsp");
  return list;
}

template <typename T>
void PretrainHeads<T>::save(const std::filesystem::path& path) const {
  numeric::save_checkpoint(params(), path);
}

template <typename T>
void PretrainHeads<T>::load(const std::filesystem::path& path) {
  auto list = params();
  numeric::load_checkpoint(list, path);
}

namespace {

template <typename T>
void score(const numeric::Tensor<T>& logits, std::span<const int> targets, TaskStats& stats) {
  const std::size_t c = logits.cols();
  const auto pred = models::argmax_rows(logits);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const T* row = logits.data() + i * c;
    const T mx = row[pred[i]];
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j] - mx));
    stats.prob_correct += std::exp(static_cast<double>(row[targets[i]] - mx)) / z;
    stats.correct += pred[i] == targets[i] ? 1 : 0;
    ++stats.count;
  }
}

template <typename T>
numeric::Tensor<T> task_loss(const models::LinearHead<T>& head, const numeric::Tensor<T>& features,
                             std::span<const int> targets, TaskStats& stats) {
  if (targets.empty()) return numeric::Tensor<T>::scalar(T(0));
  auto logits = head(features);
  score(logits, targets, stats);
  return numeric::cross_entropy(logits, targets, std::vector<bool>(targets.size(), true));
}

}  // namespace

template <typename T>
PretrainLoss<T> pretrain_loss(const PretrainHeads<T>& heads, const models::EncoderOutput<T>& out,
                              const PretrainBatch& batch) {
  using namespace numeric;
  PretrainLoss<T> loss;
  auto rows_of = [&](const std::vector<std::size_t>& rows) {
    return rows.empty() ? Tensor<T>(Shape{0, out.hidden.cols()}) : gather_rows(out.hidden, rows);
  };
  loss.ce_mwm = task_loss(heads.mwm, rows_of(batch.mwm_rows), batch.mwm_targets, loss.mwm);
  loss.ce_mam = task_loss(heads.mam, rows_of(batch.mam_rows), batch.mam_targets, loss.mam);
  if (!batch.nsp_labels.empty() && batch.nsp_labels.size() != out.cls.rows()) {
    throw ShapeError("pretrain_loss: NSP labels do not match the classification vectors");
  }
  loss.ce_nsp = task_loss(heads.nsp, out.cls, batch.nsp_labels, loss.nsp);
  loss.total = add(add(loss.ce_mwm, loss.ce_mam), loss.ce_nsp);
  return loss;
}

template struct PretrainHeads<float>;
template struct PretrainHeads<double>;
template PretrainLoss<float> pretrain_loss(const PretrainHeads<float>&, const models::EncoderOutput<float>&,
                                           const PretrainBatch&);
template PretrainLoss<double> pretrain_loss(const PretrainHeads<double>&, const models::EncoderOutput<double>&,
                                            const PretrainBatch&);

}  // namespace btf::pretrain
