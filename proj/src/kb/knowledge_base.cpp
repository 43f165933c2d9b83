#include "dlg/kb/knowledge_base.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <stdexcept>

namespace dlg::kb {

KnowledgeBase::KnowledgeBase(std::vector<MovieRecord> records,
                             std::map<Slot, std::vector<std::string>> extra_values)
    : records_(std::move(records)), extra_values_(std::move(extra_values)) {
  std::sort(records_.begin(), records_.end(),
            [](const MovieRecord& a, const MovieRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (records_[i].id == records_[i - 1].id) {
      throw std::invalid_argument("duplicate record id " + std::to_string(records_[i].id));
    }
  }
  words_ = (records_.size() + 63) / 64;
  none_.assign(words_, 0);

  for (std::size_t pos = 0; pos < records_.size(); ++pos) {
    auto& rec = records_[pos];
    SlotValues normalized;
    for (const auto& [slot, value] : rec.values) normalized[slot] = normalize_value(value);
    rec.values = std::move(normalized);
    for (const auto& [slot, value] : rec.values) {
      backed_[index_of(slot)] = true;
      auto [it, inserted] = index_[index_of(slot)].try_emplace(value, Bits(words_, 0));
      it->second[pos / 64] |= std::uint64_t{1} << (pos % 64);
    }
  }
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    for (const auto& [value, bits] : index_[s]) inventory_[s].push_back(value);
  }
  for (auto& [slot, values] : extra_values_) {
    for (auto& v : values) {
      v = normalize_value(v);
      inventory_[index_of(slot)].push_back(v);
    }
  }
  for (auto& inv : inventory_) {
    std::sort(inv.begin(), inv.end());
    inv.erase(std::unique(inv.begin(), inv.end()), inv.end());
  }
}

const KnowledgeBase::Bits* KnowledgeBase::constraint_bits(Slot slot, const std::string& value) const {
  if (!backed_[index_of(slot)]) return nullptr;
  const std::string v = normalize_value(value);
  if (v == kAnything) return nullptr;
  const auto& idx = index_[index_of(slot)];
  const auto it = idx.find(v);
  return it == idx.end() ? &none_ : &it->second;
}

std::vector<const KnowledgeBase::Bits*> KnowledgeBase::active_bits(const SymbolicQuery& q,
                                                                  std::vector<Slot>* slots) const {
  std::vector<const Bits*> out;
  for (const auto& [slot, value] : q.constraints) {
    if (const Bits* b = constraint_bits(slot, value)) {
      out.push_back(b);
      if (slots) slots->push_back(slot);
    }
  }
  return out;
}

std::vector<std::size_t> KnowledgeBase::match_positions(const SymbolicQuery& q) const {
  const auto bits = active_bits(q, nullptr);
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < words_; ++w) {
    std::uint64_t word = ~std::uint64_t{0};
    if (w == words_ - 1 && records_.size() % 64 != 0) word = (std::uint64_t{1} << (records_.size() % 64)) - 1;
    for (const Bits* b : bits) word &= (*b)[w];
    while (word) {
      out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
      word &= word - 1;
    }
  }
  return out;
}

std::optional<std::size_t> KnowledgeBase::first_match(const SymbolicQuery& q) const {
  const auto bits = active_bits(q, nullptr);
  for (std::size_t w = 0; w < words_; ++w) {
    std::uint64_t word = ~std::uint64_t{0};
    if (w == words_ - 1 && records_.size() % 64 != 0) word = (std::uint64_t{1} << (records_.size() % 64)) - 1;
    for (const Bits* b : bits) word &= (*b)[w];
    if (word) return w * 64 + static_cast<std::size_t>(std::countr_zero(word));
  }
  return std::nullopt;
}

std::vector<MovieRecord> KnowledgeBase::query(const SymbolicQuery& q) const {
  std::vector<MovieRecord> out;
  for (std::size_t pos : match_positions(q)) out.push_back(records_[pos]);
  return out;
}

std::size_t KnowledgeBase::count(const SymbolicQuery& q) const { return result_features(q).count; }

ResultFeatures KnowledgeBase::result_features(const SymbolicQuery& q) const {
  std::vector<Slot> slots;
  const auto bits = active_bits(q, &slots);
  const std::size_t k = bits.size();

  // prefix[i] = AND of bits[0..i), suffix[i] = AND of bits[i..k); one word
  // at a time so the leave-one-out counts stay O(k) per word.
  ResultFeatures features;
  std::vector<std::size_t> dropped(k, 0);
  std::vector<std::uint64_t> prefix(k + 1), suffix(k + 1);
  for (std::size_t w = 0; w < words_; ++w) {
    std::uint64_t all = ~std::uint64_t{0};
    if (w == words_ - 1 && records_.size() % 64 != 0) all = (std::uint64_t{1} << (records_.size() % 64)) - 1;
    prefix[0] = all;
    for (std::size_t i = 0; i < k; ++i) prefix[i + 1] = prefix[i] & (*bits[i])[w];
    suffix[k] = all;
    for (std::size_t i = k; i-- > 0;) suffix[i] = suffix[i + 1] & (*bits[i])[w];
    features.count += static_cast<std::size_t>(std::popcount(prefix[k]));
    for (std::size_t i = 0; i < k; ++i) {
      dropped[i] += static_cast<std::size_t>(std::popcount(prefix[i] & suffix[i + 1]));
    }
  }
  for (const auto& [slot, value] : q.constraints) features.per_slot_counts[slot] = features.count;
  for (std::size_t i = 0; i < k; ++i) features.per_slot_counts[slots[i]] = dropped[i];
  return features;
}

bool KnowledgeBase::goal_reachable(const UserGoal& goal) const {
  return first_match(SymbolicQuery{goal.inform_slots}).has_value();
}

const MovieRecord* KnowledgeBase::find_record(std::size_t id) const {
  const auto it = std::lower_bound(records_.begin(), records_.end(), id,
                                   [](const MovieRecord& r, std::size_t v) { return r.id < v; });
  return it != records_.end() && it->id == id ? &*it : nullptr;
}

void KnowledgeBase::save_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [slot, values] : extra_values_) {
    out << nlohmann::json{{"inventory", std::string(to_string(slot))}, {"values", values}}.dump() << '\n';
  }
  for (const auto& rec : records_) {
    nlohmann::json j{{"id", rec.id}, {"values", nlohmann::json::object()}};
    for (const auto& [slot, value] : rec.values) j["values"][std::string(to_string(slot))] = value;
    out << j.dump() << '\n';
  }
}

KnowledgeBase KnowledgeBase::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<MovieRecord> records;
  std::map<Slot, std::vector<std::string>> extra;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.contains("inventory")) {
      extra[slot_from_string(j.at("inventory").get<std::string>())] =
          j.at("values").get<std::vector<std::string>>();
      continue;
    }
    MovieRecord rec;
    rec.id = j.at("id").get<std::size_t>();
    for (const auto& [name, value] : j.at("values").items()) {
      rec.values[slot_from_string(name)] = value.get<std::string>();
    }
    records.push_back(std::move(rec));
  }
  return KnowledgeBase(std::move(records), std::move(extra));
}

}  // namespace dlg::kb
