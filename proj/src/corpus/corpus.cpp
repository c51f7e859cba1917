#include "btf/corpus/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string_view>

#include "btf/common/error.hpp"
#include "btf/common/rng.hpp"

namespace btf::corpus {

namespace {

constexpr std::array kEmployers = {
    "ARMOR INDUSTRIES", "BREIZH LOGISTIQUE", "OCEANE SERVICES",  "CHU BREST",
    "MAIRIE DE RENNES", "NAVAL GROUP",       "CREDIT MUTUEL",    "LACTALIS OUEST",
    "ENEDIS",           "SNCF RESEAU",       "ORANGE SA",        "ECOLE STE ANNE",
    "TRANSPORTS LE BRIS", "DOUX ALIMENTAIRE", "THALES DMS",      "AGRIAL",
    "CLINIQUE PASTEUR", "BRIT AIR",          "SILL ENTREPRISES", "LA POSTE",
    "BIGOUDEN PECHE",   "KERMENE",           "ENTREMONT",        "BOLLORE",
};
constexpr std::array kTowns = {
    "BREST",    "QUIMPER",   "PLANCOET",  "RENNES",      "LORIENT",   "VANNES",
    "MORLAIX",  "LANNION",   "SAINT MALO", "DINAN",      "NANTES",    "ST BRIEUC",
    "CONCARNEAU", "DOUARNENEZ", "CARHAIX", "PONTIVY",     "REDON",     "FOUGERES",
    "VITRE",    "LANDERNEAU",
};
constexpr std::array kGrocers = {
    "LECLERC", "CARREFOUR MARKET", "INTERMARCHE", "SUPER U", "LIDL",
    "AUCHAN",  "CASINO",           "ALDI",        "BIOCOOP", "FRANPRIX",
};
constexpr std::array kShops = {
    "FNAC",    "DECATHLON", "IKEA",    "KIABI",     "BOULANGER",
    "LEROY MERLIN", "CULTURA", "ZARA", "AMAZON EU", "ACTION",
};
constexpr std::array kLandlords = {
    "IMMO OUEST", "FONCIA", "ARMOR HABITAT", "SCI DU PORT",
    "NEXITY",     "CENTURY GESTION", "LOGIS BRETON", "ORPI GESTION",
};
constexpr std::array kNames = {
    "M DUPONT",   "MME LE GALL", "M MORVAN",    "MME GUEGUEN", "M LE ROUX",
    "MME TANGUY", "M KERMARREC", "MME PRIGENT", "M LE BIHAN",  "MME QUERE",
    "M CABON",    "MME JEZEQUEL",
};
constexpr std::array kCreditors = {"COFIDIS", "SOFINCO", "CETELEM", "FLOA BANK", "ONEY"};
constexpr std::array kStraySymbols = {"*", "-", ".", "/", "#", "@", "_", "+"};

template <std::size_t N>
std::string pick(const std::array<const char*, N>& pool, Rng& rng) {
  return pool[rng.below(N)];
}

struct Persona {
  bool fragile = false;
  std::string employer, town, grocer, shop, landlord, name, creditor;
};

struct Adoption {
  bool adopted = false;
  int day = 1;
  std::int64_t amount_cents = 0;
};

std::int64_t draw_amount(const AmountDistribution& dist, Rng& rng) {
  double magnitude = dist.location;
  if (dist.scale > 0.0) magnitude *= std::exp(dist.scale * rng.normal());
  const double quantum = dist.quantum > 0.0 ? dist.quantum : 0.01;
  magnitude = std::max(quantum, std::round(magnitude / quantum) * quantum);
  auto cents = static_cast<std::int64_t>(std::llround(magnitude * 100.0));
  cents = std::clamp<std::int64_t>(cents, 1, kMaxAbsAmountCents);
  return dist.sign == AmountSign::debit ? -cents : cents;
}

std::string digit_run(Rng& rng) {
  const std::size_t len = 4 + rng.below(5);
  std::string out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i) out.push_back(static_cast<char>('0' + rng.below(10)));
  return out;
}

std::string two_digits(int v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", v % 100);
  return buf;
}

std::string instantiate(const std::string& pattern, const Persona& p, const Date& date,
                        Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] != '{') {
      out.push_back(pattern[i++]);
      continue;
    }
    const auto close = pattern.find('}', i);
    if (close == std::string::npos) {
      out.append(pattern, i, std::string::npos);
      break;
    }
    const std::string_view key(pattern.data() + i + 1, close - i - 1);
    if (key == "digits") {
      out += digit_run(rng);
    } else if (key == "ddmm") {
      out += two_digits(date.day) + "/" + two_digits(date.month);
    } else if (key == "mmyy") {
      out += two_digits(date.month) + "/" + two_digits(date.year);
    } else if (key == "employer") {
      out += p.employer;
    } else if (key == "town") {
      out += p.town;
    } else if (key == "grocer") {
      out += p.grocer;
    } else if (key == "shop") {
      out += p.shop;
    } else if (key == "landlord") {
      out += p.landlord;
    } else if (key == "name") {
      out += p.name;
    } else if (key == "creditor") {
      out += p.creditor;
    } else {
      out.append(pattern, i, close - i + 1);
    }
    i = close + 1;
  }
  return out;
}

std::string inject_noise(std::string wording, const NoiseConfig& noise, const Date& date,
                         Rng& rng) {
  if (rng.bernoulli(noise.symbol_rate)) {
    std::vector<std::size_t> ends;
    for (std::size_t k = 0; k < wording.size(); ++k) {
      if (wording[k] != ' ' && (k + 1 == wording.size() || wording[k + 1] == ' ')) {
        ends.push_back(k + 1);
      }
    }
    if (!ends.empty()) {
      wording.insert(ends[rng.below(ends.size())], kStraySymbols[rng.below(kStraySymbols.size())]);
    }
  }
  if (rng.bernoulli(noise.digits_rate)) wording += " " + digit_run(rng);
  if (rng.bernoulli(noise.date_rate)) {
    wording += " " + two_digits(date.day) + "/" + two_digits(date.month);
  }
  if (rng.bernoulli(noise.lowercase_rate)) {
    // ASCII only: accented capitals keep their case and are handled by normalization.
    for (char& c : wording) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return wording;
}

bool has_literal(const std::string& pattern) {
  bool in_placeholder = false;
  for (char c : pattern) {
    if (c == '{') in_placeholder = true;
    else if (c == '}') in_placeholder = false;
    else if (!in_placeholder && std::isalpha(static_cast<unsigned char>(c))) return true;
  }
  return false;
}

MonthKey advance(MonthKey key, std::size_t months) {
  for (std::size_t i = 0; i < months; ++i) key = key.next();
  return key;
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_accounts == 0) throw ConfigError("corpus spec: n_accounts must be > 0");
  if (months_per_account == 0) throw ConfigError("corpus spec: months_per_account must be > 0");
  if (template_set.empty()) throw ConfigError("corpus spec: template_set is empty");
  for (const auto& t : template_set) {
    if (!has_literal(t.pattern)) {
      throw ConfigError("corpus spec: template '" + t.pattern + "' has no literal token");
    }
    if (t.category.empty()) {
      throw ConfigError("corpus spec: template '" + t.pattern + "' has no category label");
    }
    if (!(t.amount.location > 0.0) || t.amount.scale < 0.0 || t.amount.location > 200000.0) {
      throw ConfigError("corpus spec: template '" + t.pattern + "' has an invalid amount distribution");
    }
    if (t.rate_steady < 0.0 || t.rate_fragile < 0.0) {
      throw ConfigError("corpus spec: template '" + t.pattern + "' has a negative rate");
    }
  }
  for (const auto& seg : segments) {
    if (!(seg.weight > 0.0)) throw ConfigError("corpus spec: segment '" + seg.name + "' needs a positive weight");
    for (const auto& [cat, mult] : seg.category_rates) {
      if (mult < 0.0) throw ConfigError("corpus spec: segment '" + seg.name + "' has a negative rate for " + cat);
    }
  }
  if (habit_spread < 0.0) throw ConfigError("corpus spec: habit_spread must be >= 0");
  if (fragile_fraction < 0.0 || fragile_fraction > 1.0) {
    throw ConfigError("corpus spec: fragile_fraction must lie in [0, 1]");
  }
}

std::vector<AccountFlow> generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<AccountFlow> flows;
  flows.reserve(spec.n_accounts);
  const std::size_t width = std::to_string(spec.n_accounts - 1).size();

  for (std::size_t a = 0; a < spec.n_accounts; ++a) {
    // Per-account sub-seed: accounts are independent of generation order.
    Rng rng = Rng::derive(spec.seed, a);
    Persona persona;
    persona.fragile = rng.bernoulli(spec.fragile_fraction);
    persona.employer = pick(kEmployers, rng);
    persona.town = pick(kTowns, rng);
    persona.grocer = pick(kGrocers, rng);
    persona.shop = pick(kShops, rng);
    persona.landlord = pick(kLandlords, rng);
    persona.name = pick(kNames, rng);
    persona.creditor = pick(kCreditors, rng);
    std::vector<double> seg_rate(spec.template_set.size(), 1.0);
    if (!spec.segments.empty()) {
      std::vector<double> w;
      for (const auto& seg : spec.segments) w.push_back(seg.weight);
      const auto& seg = spec.segments[rng.weighted(w)];
      for (std::size_t t = 0; t < spec.template_set.size(); ++t) {
        for (const auto& [cat, mult] : seg.category_rates) {
          if (cat == spec.template_set[t].category || cat == spec.template_set[t].pattern) seg_rate[t] *= mult;
        }
      }
    }

    std::vector<Adoption> adoption(spec.template_set.size());
    std::vector<double> habit(spec.template_set.size(), 1.0);
    for (std::size_t t = 0; t < spec.template_set.size(); ++t) {
      const auto& tpl = spec.template_set[t];
      if (!tpl.monthly) {
        const double s = spec.habit_spread;
        if (s > 0.0) habit[t] = std::exp(s * rng.normal() - 0.5 * s * s);
        continue;
      }
      const double rate = seg_rate[t] * (persona.fragile ? tpl.rate_fragile : tpl.rate_steady);
      adoption[t].adopted = rng.bernoulli(std::min(rate, 1.0));
      adoption[t].day = 1 + static_cast<int>(rng.below(28));
      adoption[t].amount_cents = draw_amount(tpl.amount, rng);
    }

    AccountFlow flow;
    std::string id = std::to_string(a);
    flow.account_id = "acc" + std::string(width - id.size(), '0') + id;
    MonthKey key = advance(spec.first_month, spec.start_month_spread > 0
                                                  ? rng.below(spec.start_month_spread)
                                                  : 0);
    for (std::size_t m = 0; m < spec.months_per_account; ++m, key = key.next()) {
      Month month;
      month.key = key;
      const int dim = key.days();
      auto emit = [&](const Template& tpl, int day, std::int64_t cents) {
        const Date date{key.year, key.month, day};
        std::string wording = instantiate(tpl.pattern, persona, date, rng);
        wording = inject_noise(std::move(wording), spec.noise, date, rng);
        month.transactions.push_back(RawTransaction{date, cents, std::move(wording)});
        month.labels.push_back(tpl.category);
      };
      for (std::size_t t = 0; t < spec.template_set.size(); ++t) {
        const auto& tpl = spec.template_set[t];
        if (tpl.monthly) {
          if (!adoption[t].adopted) continue;
          const int jitter = static_cast<int>(rng.below(3)) - 1;
          emit(tpl, std::clamp(adoption[t].day + jitter, 1, dim), adoption[t].amount_cents);
        } else {
          const unsigned count =
              rng.poisson(seg_rate[t] * habit[t] * (persona.fragile ? tpl.rate_fragile : tpl.rate_steady));
          for (unsigned k = 0; k < count; ++k) {
            emit(tpl, 1 + static_cast<int>(rng.below(static_cast<std::size_t>(dim))),
                 draw_amount(tpl.amount, rng));
          }
        }
      }
      // Generation order is template order; shuffle so ordering has work to do.
      std::vector<std::size_t> perm(month.transactions.size());
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      rng.shuffle(perm);
      Month shuffled;
      shuffled.key = key;
      for (std::size_t i : perm) {
        shuffled.transactions.push_back(std::move(month.transactions[i]));
        shuffled.labels.push_back(std::move(month.labels[i]));
      }
      flow.months.push_back(std::move(shuffled));
    }
    flows.push_back(std::move(flow));
  }
  return flows;
}

std::size_t transaction_count(std::span<const AccountFlow> flows) {
  std::size_t n = 0;
  for (const auto& f : flows) {
    for (const auto& m : f.months) n += m.transactions.size();
  }
  return n;
}

}  // namespace btf::corpus
