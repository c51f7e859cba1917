#include "btf/tokenize/assemble.hpp"

#include <algorithm>
#include <numeric>

#include "btf/common/error.hpp"
#include "btf/common/format.hpp"
#include "btf/preprocess/normalize.hpp"
#include "btf/tokenize/symbols.hpp"

namespace btf::tokenize {

std::size_t TokenizedSequence::true_length() const noexcept {
  return static_cast<std::size_t>(std::count(attn_mask.begin(), attn_mask.end(), true));
}

std::vector<std::size_t> order_permutation(std::span<const corpus::RawTransaction> month) {
  std::vector<std::size_t> perm(month.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = month[a];
    const auto& tb = month[b];
    if (ta.date != tb.date) return ta.date < tb.date;
    return ta.amount_cents < tb.amount_cents;
  });
  return perm;
}

std::vector<corpus::RawTransaction> order_events(std::span<const corpus::RawTransaction> month) {
  std::vector<corpus::RawTransaction> out;
  out.reserve(month.size());
  for (std::size_t i : order_permutation(month)) out.push_back(month[i]);
  return out;
}

Tokenizer::Tokenizer(VocabModel vocab, AmountQuantizer amounts, DateQuantizer dates)
    : vocab_(std::move(vocab)), amounts_(std::move(amounts)), dates_(dates) {}

namespace {

struct Event {
  std::vector<int> pieces;
  int amount = 0;
  int date = 0;
  std::int64_t cents = 0;
  std::pair<std::size_t, std::size_t> origin;
};

std::size_t token_count(const std::vector<Event>& events) {
  std::size_t n = 0;
  for (const auto& e : events) n += e.pieces.size();
  return n;
}

}  // namespace

TokenizedSequence Tokenizer::assemble(std::span<const corpus::Month> months, NspRole role,
                                      std::size_t max_tokens) const {
  if (months.empty()) throw InputError("assemble: no months given");
  if (role == NspRole::bi && months.size() != 2) {
    throw InputError("assemble: a bi-sequence needs exactly two months");
  }

  auto segment_month = [&](std::size_t m) {
    const auto& month = months[m];
    std::vector<Event> events;
    for (std::size_t i : order_permutation(month.transactions)) {
      const auto& t = month.transactions[i];
      if (t.date.month_key() != month.key) {
        throw InputError("assemble: transaction dated " + t.date.str() + " filed under " +
                         month.key.str());
      }
      Event e;
      e.pieces = vocab_.segment(encode_wording(t.wording));
      e.amount = amounts_.quantize_cents(t.amount_cents);
      e.date = dates_.quantize(t.date.day, t.date.days_in_month());
      e.cents = t.amount_cents;
      e.origin = {m, i};
      events.push_back(std::move(e));
    }
    if (events.empty()) {
      Event e;
      e.pieces = vocab_.segment(encode_wording(preprocess::kEmptyTag));
      e.amount = amounts_.quantize_cents(0);
      e.date = 0;
      e.origin = {m, static_cast<std::size_t>(-1)};
      events.push_back(std::move(e));
    }
    return events;
  };

  std::vector<std::vector<Event>> segments;
  if (role == NspRole::mono) {
    segments.emplace_back();
    for (std::size_t m = 0; m < months.size(); ++m) {
      auto ev = segment_month(m);
      segments[0].insert(segments[0].end(), std::make_move_iterator(ev.begin()),
                         std::make_move_iterator(ev.end()));
    }
  } else {
    segments.push_back(segment_month(0));
    segments.push_back(segment_month(1));
  }

  if (max_tokens > 0) {
    const std::size_t controls = segments.size() + 1;
    auto total = [&] {
      std::size_t n = controls;
      for (const auto& s : segments) n += token_count(s);
      return n;
    };
    while (total() > max_tokens) {
      std::size_t victim = segments.size();
      std::size_t longest = 0;
      for (std::size_t s = 0; s < segments.size(); ++s) {
        const std::size_t n = token_count(segments[s]);
        if (segments[s].size() > 1 && n > longest) {
          longest = n;
          victim = s;
        }
      }
      if (victim == segments.size()) break;
      segments[victim].pop_back();
    }
  }

  const auto& cx = vocab_.control();
  const auto& ca = amounts_.control();
  const auto& cd = dates_.control();
  TokenizedSequence seq;
  auto push = [&](int x, int a, int d, int t) {
    seq.x_ids.push_back(x);
    seq.a_ids.push_back(a);
    seq.d_ids.push_back(d);
    seq.t_ids.push_back(t);
    seq.attn_mask.push_back(true);
  };
  push(cx.bos, ca.bos, cd.bos, 0);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const int identity = static_cast<int>(s);
    if (s > 0) {
      seq.sep_positions.push_back(seq.size());
      push(cx.sep, ca.sep, cd.sep, 0);
    }
    for (const auto& e : segments[s]) {
      const std::size_t start = seq.size();
      for (int piece : e.pieces) push(piece, e.amount, e.date, identity);
      seq.event_spans.emplace_back(start, seq.size());
      seq.event_origin.push_back(e.origin);
      seq.event_amount_cents.push_back(e.cents);
    }
  }
  push(cx.eos, ca.eos, cd.eos, segments.size() > 1 ? 1 : 0);
  return seq;
}

void Tokenizer::pad_to(TokenizedSequence& seq, std::size_t length) const {
  if (length < seq.size()) {
    throw ShapeError("pad_to: sequence of length " + std::to_string(seq.size()) +
                     " exceeds target " + std::to_string(length));
  }
  seq.x_ids.resize(length, vocab_.control().pad);
  seq.a_ids.resize(length, amounts_.control().pad);
  seq.d_ids.resize(length, dates_.control().pad);
  seq.t_ids.resize(length, 0);
  seq.attn_mask.resize(length, false);
}

std::string Tokenizer::listing(const TokenizedSequence& seq) const {
  std::vector<std::string> words, dates, amounts;
  std::vector<std::size_t> event_of(seq.size(), static_cast<std::size_t>(-1));
  for (std::size_t e = 0; e < seq.event_spans.size(); ++e) {
    for (std::size_t p = seq.event_spans[e].first; p < seq.event_spans[e].second; ++p) event_of[p] = e;
  }
  for (std::size_t p = 0; p < seq.size(); ++p) {
    if (!seq.attn_mask[p]) break;
    const int x = seq.x_ids[p];
    if (vocab_.is_control(x)) {
      words.push_back(vocab_.piece(x));
      dates.push_back(vocab_.piece(x));
      amounts.push_back(vocab_.piece(x));
      continue;
    }
    words.push_back(vocab_.piece(x));
    dates.push_back(std::to_string(seq.d_ids[p]) + "/" + std::to_string(dates_.steps()));
    const std::int64_t cents = event_of[p] < seq.event_amount_cents.size()
                                   ? seq.event_amount_cents[event_of[p]]
                                   : 0;
    amounts.push_back(format_exact(static_cast<double>(cents) / 100.0));
  }
  auto join = [](const char* title, const std::vector<std::string>& items) {
    std::string line = title;
    for (std::size_t k = 0; k < items.size(); ++k) line += (k ? " | " : " ") + items[k];
    return line + "\n";
  };
  return join("Wordings:", words) + join("Dates:", dates) + join("Amounts:", amounts);
}

void Tokenizer::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
  vocab_.save(dir / "vocab.tsv");
  amounts_.save(dir / "amounts.json");
}

Tokenizer Tokenizer::load(const std::filesystem::path& dir) {
  return Tokenizer(VocabModel::load(dir / "vocab.tsv"), AmountQuantizer::load(dir / "amounts.json"));
}

TokenizedSequence assemble(const VocabModel& vocab, const AmountQuantizer& aq,
                           const DateQuantizer& dq, std::span<const corpus::Month> months,
                           NspRole role) {
  return Tokenizer(vocab, aq, dq).assemble(months, role);
}

}  // namespace btf::tokenize
