#pragma once

#include <cstddef>
#include <span>

#include "btf/common/rng.hpp"
#include "btf/corpus/corpus.hpp"

namespace btf::pretrain {

struct NspPair {
  const corpus::Month* first = nullptr;
  const corpus::Month* second = nullptr;
  int label = 0;  // 1: second is the month right after first, same account
};

// Indices of months m of `flow` whose successor m + 1 is the next calendar month.
std::vector<std::size_t> continuation_months(const corpus::AccountFlow& flow);

// With probability p_nsp the true continuation (label 1), otherwise any month
// of a different account in `pool` (label 0). Throws SamplingError when the
// account has no consecutive months or the pool has no other account.
NspPair make_nsp_pair(std::span<const corpus::AccountFlow> pool, std::size_t account, Rng& rng,
                      double p_nsp);

}  // namespace btf::pretrain
