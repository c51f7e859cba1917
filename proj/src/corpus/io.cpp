#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "btf/common/error.hpp"
#include "btf/corpus/corpus.hpp"

namespace btf::corpus {

using ordered_json = nlohmann::ordered_json;

std::string to_jsonl(std::span<const AccountFlow> flows) {
  std::string out;
  for (const auto& flow : flows) {
    for (const auto& month : flow.months) {
      for (std::size_t i = 0; i < month.transactions.size(); ++i) {
        const auto& t = month.transactions[i];
        ordered_json rec;
        rec["account_id"] = flow.account_id;
        rec["date"] = t.date.str();
        rec["amount_cents"] = t.amount_cents;
        rec["wording"] = t.wording;
        rec["label"] = i < month.labels.size() ? month.labels[i] : std::string();
        out += rec.dump();
        out += '\n';
      }
    }
  }
  return out;
}

void save_corpus(std::span<const AccountFlow> flows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << to_jsonl(flows);
  if (!os) throw IoError("write failed on '" + path.string() + "'");
}

namespace {

const ordered_json& require(const ordered_json& rec, const char* field, std::size_t line) {
  auto it = rec.find(field);
  if (it == rec.end()) throw ParseError(line, std::string("missing field \"") + field + "\"");
  return *it;
}

}  // namespace

std::vector<AccountFlow> from_jsonl(std::string_view text) {
  std::vector<AccountFlow> flows;
  std::unordered_map<std::string, std::size_t> account_index;
  std::vector<std::map<MonthKey, Month>> months;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line_no, "record is not a JSON object");

    RawTransaction txn;
    std::string account, label;
    try {
      const auto& acc = require(rec, "account_id", line_no);
      const auto& date = require(rec, "date", line_no);
      const auto& amount = require(rec, "amount_cents", line_no);
      const auto& wording = require(rec, "wording", line_no);
      if (!acc.is_string()) throw ParseError(line_no, "\"account_id\" must be a string");
      if (!date.is_string()) throw ParseError(line_no, "\"date\" must be a string");
      if (!amount.is_number_integer()) throw ParseError(line_no, "\"amount_cents\" must be an integer");
      if (!wording.is_string()) throw ParseError(line_no, "\"wording\" must be a string");
      account = acc.get<std::string>();
      txn.date = Date::parse(date.get<std::string>());
      txn.amount_cents = amount.get<std::int64_t>();
      txn.wording = wording.get<std::string>();
      if (auto it = rec.find("label"); it != rec.end()) {
        if (!it->is_string()) throw ParseError(line_no, "\"label\" must be a string");
        label = it->get<std::string>();
      }
    } catch (const InputError& e) {
      throw ParseError(line_no, e.what());
    }

    auto [it, inserted] = account_index.try_emplace(account, flows.size());
    if (inserted) {
      flows.push_back(AccountFlow{account, {}});
      months.emplace_back();
    }
    auto& month = months[it->second][txn.date.month_key()];
    month.key = txn.date.month_key();
    month.transactions.push_back(std::move(txn));
    month.labels.push_back(std::move(label));
  }

  for (std::size_t a = 0; a < flows.size(); ++a) {
    for (auto& [key, month] : months[a]) flows[a].months.push_back(std::move(month));
  }
  return flows;
}

std::vector<AccountFlow> load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_jsonl(ss.str());
}

}  // namespace btf::corpus
