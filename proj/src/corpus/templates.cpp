#include "btf/corpus/corpus.hpp"

namespace btf::corpus {

namespace {

Template make(std::string pattern, std::string category, double location, double scale,
              AmountSign sign, bool monthly, double rate_steady, double rate_fragile,
              double quantum = 0.01) {
  Template t;
  t.pattern = std::move(pattern);
  t.category = std::move(category);
  t.amount = AmountDistribution{location, scale, sign, quantum};
  t.monthly = monthly;
  t.rate_steady = rate_steady;
  t.rate_fragile = rate_fragile;
  return t;
}

}  // namespace

// Calibrated so that 1st/99th percentiles of generated amounts fall near
// -1750 / +2760 euros (recorded in tests/fixtures/corpus_percentiles.json).
std::vector<Template> default_templates() {
  constexpr auto D = AmountSign::debit;
  constexpr auto C = AmountSign::credit;
  return {
      make("VIR SALAIRE {employer} {mmyy}", "income", 2280.0, 0.36, C, true, 0.88, 0.55),
      make("VIR POLE EMPLOI BRETAGNE {mmyy}", "income", 950.0, 0.25, C, true, 0.07, 0.40),
      make("VIR CAF ALLOCATIONS {digits}", "income", 180.0, 0.50, C, true, 0.25, 0.50),
      make("PRLV LOYER {landlord} {mmyy}", "housing", 760.0, 0.40, D, true, 0.55, 0.65),
      make("ÉCHÉANCE PRÊT IMMO {digits}", "housing", 1850.0, 0.35, D, true, 0.36, 0.08),
      make("CARTE {ddmm} {grocer} {town}", "groceries", 42.0, 0.70, D, false, 5.0, 4.5),
      make("CARTE {ddmm} BOULANGERIE PÂTISSERIE {town}", "groceries", 7.5, 0.45, D, false,
           2.5, 2.0),
      make("CARTE {ddmm} {shop}", "shopping", 55.0, 0.90, D, false, 1.8, 1.4),
      make("CARTE {ddmm} STATION TOTAL {town}", "transport", 48.0, 0.40, D, false, 1.4, 1.1),
      make("PRLV SNCF VOYAGES {digits}", "transport", 65.0, 0.60, D, false, 0.25, 0.15),
      make("PRLV NETFLIX.COM", "subscription", 13.49, 0.0, D, true, 0.45, 0.35),
      make("PRLV SPOTIFY P{digits}", "subscription", 10.99, 0.0, D, true, 0.35, 0.30),
      make("PRLV FREE MOBILE {digits}", "subscription", 19.99, 0.0, D, true, 0.60, 0.60),
      make("PRÉLÈVEMENT EDF CLIENTS PARTICULIERS", "utilities", 85.0, 0.35, D, true, 0.80,
           0.70),
      make("PRLV RÉGIE DES EAUX {town}", "utilities", 32.0, 0.30, D, true, 0.40, 0.30),
      make("RET DAB {digits} {town}", "cash", 60.0, 0.60, D, false, 1.2, 2.6, 20.0),
      make("CHQ {digits}", "check", 90.0, 1.00, D, false, 0.45, 0.55),
      make("REMISE CHQ {digits}", "check", 150.0, 0.80, C, false, 0.15, 0.10),
      make("VIR {name} {digits}", "transfer", 160.0, 1.10, D, false, 0.45, 0.50),
      make("VIR ÉPARGNE LIVRET A", "savings", 320.0, 1.05, D, true, 0.50, 0.08),
      make("VIR PERMANENT ASSURANCE VIE", "savings", 1200.0, 0.60, D, true, 0.14, 0.01),
      make("FRAIS TENUE DE COMPTE", "fees", 2.0, 0.0, D, true, 0.90, 0.90),
      make("COTISATION CARTE VISA", "fees", 3.5, 0.0, D, true, 0.50, 0.50),
      make("COMMISSION D'INTERVENTION", "incident", 8.0, 0.0, D, false, 0.03, 0.90),
      make("FRAIS REJET PRLV {creditor}", "incident", 20.0, 0.0, D, false, 0.02, 0.45),
      make("CARTE {ddmm} PHARMACIE {town}", "health", 18.0, 0.60, D, false, 0.8, 0.8),
      make("VIR CPAM SÉCURITÉ SOCIALE {digits}", "health", 25.0, 0.60, C, false, 0.5, 0.5),
      make("CARTE {ddmm} CAFÉ RESTAURANT {town}", "leisure", 24.0, 0.60, D, false, 1.8, 0.9),
      make("CARTE {ddmm} CINÉMA {town}", "leisure", 11.0, 0.20, D, false, 0.4, 0.2),
      // Segment markers: rare unless a segment boosts them.
      make("VIR CARSAT RETRAITE {mmyy}", "income", 1350.0, 0.30, C, true, 0.01, 0.01),
      make("PRLV AMAZON PRIME", "subscription", 6.99, 0.0, D, true, 0.02, 0.02),
      make("PRLV CANTINE SCOLAIRE {town}", "utilities", 65.0, 0.35, D, true, 0.02, 0.02),
      make("PRLV KORRIGO ABONNEMENT {digits}", "transport", 54.0, 0.0, D, true, 0.02, 0.02),
      make("VIR ÉPARGNE LEP", "savings", 150.0, 0.60, D, true, 0.02, 0.01),
  };
}

std::vector<Segment> default_segments() {
  return {
      {"traditional", 1.0, {{"check", 5.0}, {"cash", 2.5}, {"health", 2.0}, {"leisure", 0.2},
                            {"subscription", 0.15}, {"shopping", 0.3},
                            {"VIR CARSAT RETRAITE {mmyy}", 70.0}}},
      {"digital", 1.0, {{"subscription", 2.5}, {"shopping", 3.0}, {"cash", 0.1}, {"check", 0.05},
                        {"leisure", 1.8}, {"PRLV AMAZON PRIME", 18.0}}},
      {"family", 1.0, {{"groceries", 2.2}, {"health", 3.0}, {"leisure", 0.4}, {"shopping", 1.3},
                       {"PRLV CANTINE SCOLAIRE {town}", 45.0}}},
      {"commuter", 1.0, {{"transport", 4.0}, {"leisure", 0.6}, {"groceries", 0.7},
                         {"PRLV KORRIGO ABONNEMENT {digits}", 45.0}}},
      {"thrifty", 1.0, {{"shopping", 0.2}, {"leisure", 0.2}, {"transfer", 3.5}, {"savings", 2.5},
                        {"groceries", 0.8}, {"VIR ÉPARGNE LEP", 22.0}}},
  };
}

CorpusSpec default_corpus_spec(std::size_t n_accounts, std::size_t months_per_account,
                               std::uint64_t seed) {
  CorpusSpec spec;
  spec.n_accounts = n_accounts;
  spec.months_per_account = months_per_account;
  spec.seed = seed;
  spec.template_set = default_templates();
  spec.noise = NoiseConfig{0.15, 0.20, 0.08, 0.05};
  spec.fragile_fraction = 0.25;
  spec.habit_spread = 1.0;
  spec.segments = default_segments();
  return spec;
}

}  // namespace btf::corpus
