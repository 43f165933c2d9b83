#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dlg/core/dialogue_act.hpp"

namespace dlg::kb {

struct MovieRecord {
  std::size_t id = 0;
  SlotValues values;  // normalized

  bool operator==(const MovieRecord&) const = default;
};

struct SymbolicQuery {
  SlotValues constraints;
};

struct ResultFeatures {
  std::size_t count = 0;
  // Match count with that constraint dropped, for every constrained slot.
  std::map<Slot, std::size_t> per_slot_counts;

  bool operator==(const ResultFeatures&) const = default;
};

// Immutable showing database. Matching is exact on normalized strings.
// Constraints on slots no record stores, and constraints whose value is
// `anything`, do not restrict the result.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  // Records are re-ordered by id; ids must be unique.
  explicit KnowledgeBase(std::vector<MovieRecord> records,
                         std::map<Slot, std::vector<std::string>> extra_values = {});

  const std::vector<MovieRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // True when at least one record stores this slot.
  bool backs(Slot slot) const { return backed_[index_of(slot)]; }

  std::vector<MovieRecord> query(const SymbolicQuery& q) const;
  // Positions into records() of the matches, ascending.
  std::vector<std::size_t> match_positions(const SymbolicQuery& q) const;
  std::optional<std::size_t> first_match(const SymbolicQuery& q) const;
  std::size_t count(const SymbolicQuery& q) const;
  ResultFeatures result_features(const SymbolicQuery& q) const;
  bool goal_reachable(const UserGoal& goal) const;

  const MovieRecord* find_record(std::size_t id) const;

  // Distinct values seen for a slot (records plus extra inventories),
  // sorted. Empty for slots with no inventory.
  const std::vector<std::string>& values_of(Slot slot) const { return inventory_[index_of(slot)]; }
  const std::map<Slot, std::vector<std::string>>& extra_values() const { return extra_values_; }

  void save_jsonl(const std::filesystem::path& path) const;
  static KnowledgeBase load_jsonl(const std::filesystem::path& path);

 private:
  using Bits = std::vector<std::uint64_t>;

  // Bitset of matching records for a constraint, or nullptr when the
  // constraint does not restrict. `none_` when the value is unknown.
  const Bits* constraint_bits(Slot slot, const std::string& value) const;
  std::vector<const Bits*> active_bits(const SymbolicQuery& q, std::vector<Slot>* slots) const;

  std::vector<MovieRecord> records_;
  std::map<Slot, std::vector<std::string>> extra_values_;
  std::array<bool, kNumSlots> backed_{};
  std::array<std::vector<std::string>, kNumSlots> inventory_;
  std::array<std::unordered_map<std::string, Bits>, kNumSlots> index_;
  Bits none_;
  std::size_t words_ = 0;
};

}  // namespace dlg::kb
