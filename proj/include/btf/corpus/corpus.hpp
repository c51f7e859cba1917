#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "btf/common/date.hpp"

namespace btf::corpus {

// One bank event. Amounts are integer euro cents; conversion to euros happens
// only inside the amount tokenizer.
struct RawTransaction {
  Date date;
  std::int64_t amount_cents = 0;
  std::string wording;

  bool operator==(const RawTransaction&) const = default;
};

// One calendar month of an account. `labels` is the hidden category sidecar,
// parallel to `transactions`; tokenization never reads it.
struct Month {
  MonthKey key;
  std::vector<RawTransaction> transactions;
  std::vector<std::string> labels;

  bool operator==(const Month&) const = default;
};

struct AccountFlow {
  std::string account_id;
  std::vector<Month> months;  // ascending month keys

  bool operator==(const AccountFlow&) const = default;
};

enum class AmountSign { debit, credit };

// Magnitude is log-normal around `location` euros with log-space spread
// `scale` (0 = fixed amount), rounded to a multiple of `quantum` euros.
struct AmountDistribution {
  double location = 10.0;
  double scale = 0.0;
  AmountSign sign = AmountSign::debit;
  double quantum = 0.01;
};

// A wording pattern. Placeholders in braces are filled per event or per account:
//   {digits} random 4-8 digit run      {ddmm} dd/mm fragment of the event day
//   {mmyy}  mm/yy of the event month   {employer} {town} {grocer} {shop}
//   {landlord} {name} {creditor}       account-level picks from fixed pools
// `monthly` templates are adopted once per account (probability = rate) and
// then recur every month with a fixed day and a fixed amount; the others occur
// Poisson(rate) times per month with amounts drawn per event.
struct Template {
  std::string pattern;
  std::string category;
  AmountDistribution amount;
  bool monthly = false;
  double rate_steady = 1.0;
  double rate_fragile = 1.0;
};

// Surface noise applied to instantiated wordings.
struct NoiseConfig {
  double lowercase_rate = 0.0;   // whole wording in lower case
  double symbol_rate = 0.0;      // stray symbol inserted
  double digits_rate = 0.0;      // trailing reference number appended
  double date_rate = 0.0;        // trailing dd/mm fragment appended
};

// A customer segment: every account belongs to one, drawn with probability
// proportional to `weight`. `category_rates` multiplies the rates (Poisson
// rates and monthly adoption probabilities) of all templates whose category
// or exact pattern equals the key.
struct Segment {
  std::string name;
  double weight = 1.0;
  std::vector<std::pair<std::string, double>> category_rates;
};

struct CorpusSpec {
  std::size_t n_accounts = 0;
  std::size_t months_per_account = 0;
  std::uint64_t seed = 0;
  std::vector<Template> template_set;
  NoiseConfig noise;
  double fragile_fraction = 0.0;
  // Log-space spread of per-account multipliers on the Poisson rates of
  // non-monthly templates (mean-one log-normal; 0 disables). Gives each
  // account its own template mixture.
  double habit_spread = 0.0;
  std::vector<Segment> segments;  // empty: one neutral segment
  MonthKey first_month{2021, 1};
  std::size_t start_month_spread = 12;  // accounts start within this many months

  // Throws ConfigError describing the first violated invariant.
  void validate() const;
};

// Default corpus: ~20 templates over 15 categories, with noise injection on.
std::vector<Template> default_templates();
std::vector<Segment> default_segments();
CorpusSpec default_corpus_spec(std::size_t n_accounts, std::size_t months_per_account,
                               std::uint64_t seed);

std::vector<AccountFlow> generate_corpus(const CorpusSpec& spec);

// JSON lines, one transaction per line:
// {"account_id","date","amount_cents","wording","label"}
void save_corpus(std::span<const AccountFlow> flows, const std::filesystem::path& path);
std::vector<AccountFlow> load_corpus(const std::filesystem::path& path);

std::string to_jsonl(std::span<const AccountFlow> flows);
std::vector<AccountFlow> from_jsonl(std::string_view text);

// Generated amounts are clamped to this magnitude (cents).
inline constexpr std::int64_t kMaxAbsAmountCents = 200'000'00;

std::size_t transaction_count(std::span<const AccountFlow> flows);

}  // namespace btf::corpus
