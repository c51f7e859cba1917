#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "btf/corpus/corpus.hpp"

namespace btf::preprocess {

inline constexpr std::string_view kDigitsTag = "<digits>";
inline constexpr std::string_view kDateTag = "<date>";
inline constexpr std::string_view kEmptyTag = "<empty>";

// Total function over arbitrary bytes (invalid UTF-8 is dropped). In order:
// date fragments (d/m, d/m/y with 1-2 digit fields) -> <date>; remaining
// digit runs -> <digits>; lower case; accent folding (canonical decomposition,
// combining marks stripped); removal of everything outside [a-z ]; whitespace
// collapse; empty result -> <empty>. Tag literals already present in the input
// are kept atomic, which makes the function idempotent.
std::string normalize_wording(std::string_view raw);

// Normalized transactions keep the RawTransaction layout: only the wording
// changes, dates, amounts and labels are untouched.
corpus::AccountFlow normalize_flow(const corpus::AccountFlow& flow);
std::vector<corpus::AccountFlow> normalize_corpus(std::span<const corpus::AccountFlow> flows);

// True iff `wording` is in normalized form (alphabet, spacing, tags).
bool is_normalized(std::string_view wording);

}  // namespace btf::preprocess
