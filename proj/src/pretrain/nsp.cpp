#include "btf/pretrain/nsp.hpp"

#include "btf/common/error.hpp"

namespace btf::pretrain {

std::vector<std::size_t> continuation_months(const corpus::AccountFlow& flow) {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m + 1 < flow.months.size(); ++m) {
    if (flow.months[m].key.next() == flow.months[m + 1].key) out.push_back(m);
  }
  return out;
}

NspPair make_nsp_pair(std::span<const corpus::AccountFlow> pool, std::size_t account, Rng& rng,
                      double p_nsp) {
  if (account >= pool.size()) throw SamplingError("make_nsp_pair: account index out of range");
  const auto& flow = pool[account];
  const auto starts = continuation_months(flow);
  if (starts.empty()) {
    throw SamplingError("make_nsp_pair: account " + flow.account_id + " has no two consecutive months");
  }
  const std::size_t m = starts[rng.below(starts.size())];
  NspPair pair;
  pair.first = &flow.months[m];
  if (rng.bernoulli(p_nsp)) {
    pair.second = &flow.months[m + 1];
    pair.label = 1;
    return pair;
  }
  if (pool.size() < 2) throw SamplingError("make_nsp_pair: no other account to draw a negative from");
  std::size_t other = rng.below(pool.size() - 1);
  if (other >= account) ++other;
  const auto& months = pool[other].months;
  if (months.empty()) throw SamplingError("make_nsp_pair: account " + pool[other].account_id + " has no months");
  pair.second = &months[rng.below(months.size())];
  pair.label = 0;
  return pair;
}

}  // namespace btf::pretrain
