#include "btf/tokenize/unigram.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "btf/common/error.hpp"
#include "btf/tokenize/symbols.hpp"

namespace btf::tokenize {

namespace {

struct Piece {
  std::string text;
  double log_prob = 0.0;
  bool required = false;
};

VocabModel build(const std::vector<Piece>& pieces) {
  std::vector<std::pair<std::string, double>> list;
  list.reserve(pieces.size());
  for (const auto& p : pieces) list.emplace_back(p.text, p.log_prob);
  return VocabModel::from_pieces(list);
}

// One hard-EM sweep. Returns Viterbi piece counts indexed like `pieces`.
std::vector<double> viterbi_counts(const std::vector<Piece>& pieces,
                                   const std::vector<std::pair<std::string, double>>& words) {
  const VocabModel model = build(pieces);
  std::unordered_map<int, std::size_t> slot;
  for (std::size_t k = 0; k < pieces.size(); ++k) slot[*model.find(pieces[k].text)] = k;
  std::vector<double> counts(pieces.size(), 0.0);
  for (const auto& [word, freq] : words) {
    for (int id : model.segment(word)) counts[slot.at(id)] += freq;
  }
  return counts;
}

void reestimate(std::vector<Piece>& pieces, const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  std::vector<Piece> kept;
  double min_lp = 0.0;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (counts[k] > 0.0) {
      pieces[k].log_prob = std::log(counts[k] / total);
      min_lp = std::min(min_lp, pieces[k].log_prob);
    }
  }
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (counts[k] > 0.0) {
      kept.push_back(pieces[k]);
    } else if (pieces[k].required) {
      kept.push_back(pieces[k]);
      kept.back().log_prob = min_lp - 10.0;
    }
  }
  pieces = std::move(kept);
}

}  // namespace

VocabModel train_unigram(const std::vector<std::string>& encoded_wordings,
                         const UnigramOptions& options) {
  if (encoded_wordings.empty()) throw ConfigError("train_unigram: empty corpus");
  if (options.max_piece_symbols == 0) throw ConfigError("train_unigram: max_piece_symbols must be > 0");
  if (!(options.shrink > 0.0 && options.shrink < 1.0)) {
    throw ConfigError("train_unigram: shrink must lie in (0, 1)");
  }

  // Each encoded wording starts with the separator, which occurs nowhere else,
  // so whole wordings are the independent units of segmentation.
  std::map<std::string, double> unique;
  for (const auto& w : encoded_wordings) {
    if (!w.empty()) unique[w] += 1.0;
  }
  const std::vector<std::pair<std::string, double>> words(unique.begin(), unique.end());

  std::map<std::string, double> singles;
  std::unordered_map<std::string, double> substrings;
  for (const auto& [word, freq] : words) {
    const auto off = symbol_offsets(word);
    const std::size_t n = off.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
      singles[word.substr(off[i], off[i + 1] - off[i])] += freq;
      for (std::size_t j = i + 2; j <= std::min(n, i + options.max_piece_symbols); ++j) {
        substrings[word.substr(off[i], off[j] - off[i])] += freq;
      }
    }
  }
  for (auto tag : kProtectedTags) singles.try_emplace(std::string(tag), 0.0);

  const std::size_t reserved = kControlTokens.size();
  const std::size_t required = reserved + singles.size();
  if (options.target_size < required) {
    throw ConfigError("train_unigram: target_size " + std::to_string(options.target_size) +
                      " is below the " + std::to_string(required) +
                      " control, protected and single-symbol tokens");
  }
  const std::size_t available = required + substrings.size();
  if (available < options.target_size) {
    throw TrainingError("train_unigram: corpus yields only " + std::to_string(available) +
                        " candidate tokens, below target " + std::to_string(options.target_size));
  }
  const std::size_t target_extra = options.target_size - required;

  std::vector<std::pair<std::string, double>> seeds(substrings.begin(), substrings.end());
  auto symbols_of = [](const std::string& s) { return symbol_offsets(s).size() - 1; };
  std::vector<double> seed_score(seeds.size());
  std::vector<std::size_t> order(seeds.size());
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    seed_score[k] = seeds[k].second * static_cast<double>(symbols_of(seeds[k].first));
    order[k] = k;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (seed_score[a] != seed_score[b]) return seed_score[a] > seed_score[b];
    return seeds[a].first < seeds[b].first;
  });
  const std::size_t seed_size =
      std::max(target_extra, options.seed_size ? options.seed_size : 8 * options.target_size);
  order.resize(std::min(order.size(), seed_size));

  std::vector<Piece> pieces;
  double total = 0.0;
  for (const auto& [s, f] : singles) total += f;
  for (std::size_t k : order) total += seeds[k].second;
  for (const auto& [s, f] : singles) {
    pieces.push_back(Piece{s, f > 0.0 ? std::log(f / total) : std::log(0.5 / total), true});
  }
  for (std::size_t k : order) {
    pieces.push_back(Piece{seeds[k].first, std::log(seeds[k].second / total), false});
  }

  auto extra_count = [&] {
    return static_cast<std::size_t>(
        std::count_if(pieces.begin(), pieces.end(), [](const Piece& p) { return !p.required; }));
  };

  while (true) {
    for (std::size_t it = 0; it < std::max<std::size_t>(1, options.em_iterations); ++it) {
      reestimate(pieces, viterbi_counts(pieces, words));
    }
    const std::size_t extra = extra_count();
    if (extra <= target_extra) break;

    const std::vector<double> counts = viterbi_counts(pieces, words);
    const VocabModel model = build(pieces);
    std::vector<std::pair<double, std::size_t>> loss;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (pieces[k].required) continue;
      const int id = *model.find(pieces[k].text);
      const auto alt = model.best_segmentation(pieces[k].text, id);
      const double alt_score = alt ? alt->first : -1e300;
      loss.emplace_back(counts[k] * (pieces[k].log_prob - alt_score), k);
    }
    std::sort(loss.begin(), loss.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return pieces[a.second].text < pieces[b.second].text;
    });
    const auto keep = std::max(
        target_extra, static_cast<std::size_t>(options.shrink * static_cast<double>(extra)));
    std::vector<bool> drop(pieces.size(), false);
    for (std::size_t r = keep; r < loss.size(); ++r) drop[loss[r].second] = true;
    std::vector<Piece> next;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (!drop[k]) next.push_back(pieces[k]);
    }
    pieces = std::move(next);
  }

  // Final order: protected tags are placed by from_pieces; others by
  // probability, then text.
  std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.text < b.text;
  });
  return build(pieces);
}

}  // namespace btf::tokenize
