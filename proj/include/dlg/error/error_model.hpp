#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

#include "dlg/core/intent_label.hpp"
#include "dlg/core/rng.hpp"
#include "dlg/kb/knowledge_base.hpp"

namespace dlg::error_model {

class UnknownLabel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IntentErrorType : std::uint8_t { kRandom, kWithinGroup, kBetweenGroup };
enum class SlotErrorType : std::uint8_t { kRandom, kDeletion, kValue, kSlot };

std::string_view to_string(IntentErrorType t);
std::string_view to_string(SlotErrorType t);
IntentErrorType intent_error_type_from_string(std::string_view s);
SlotErrorType slot_error_type_from_string(std::string_view s);

struct ErrorSpec {
  IntentErrorType intent_type = IntentErrorType::kRandom;
  double intent_rate = 0.0;
  SlotErrorType slot_type = SlotErrorType::kRandom;
  double slot_rate = 0.0;

  bool operator==(const ErrorSpec&) const = default;
};

nlohmann::json to_json(const ErrorSpec& spec);
ErrorSpec error_spec_from_json(const nlohmann::json& j);
// Throws std::invalid_argument when a rate is outside [0, 1].
void validate(const ErrorSpec& spec);

// 1 general, 2 inform family, 3 request family.
int intent_group(const IntentLabel& label);
int intent_group(std::string_view label);  // UnknownLabel

struct CorruptionReport {
  bool intent_drawn = false;     // the Bernoulli draw selected the intent
  bool intent_changed = false;
  bool intent_skipped = false;   // drawn but no alternative label exists
  IntentErrorType intent_mode = IntentErrorType::kRandom;  // resolved mode
  std::size_t slots_eligible = 0;
  std::size_t slots_drawn = 0;
  std::size_t slots_skipped = 0;  // drawn but no replacement available
  std::size_t deletions = 0;
  std::size_t value_swaps = 0;
  std::size_t slot_swaps = 0;
};

// Applies intent noise to the composite label, then per-slot noise to each
// inform pair. Replacement values come from the KB inventories and always
// differ from the original. The result passes validate_act.
DialogueAct corrupt(const DialogueAct& act, const ErrorSpec& spec, const kb::KnowledgeBase& kb,
                    Rng& rng, CorruptionReport* report = nullptr);

struct RateEstimate {
  std::size_t intent_trials = 0;
  std::size_t intent_hits = 0;
  std::size_t slot_trials = 0;
  std::size_t slot_hits = 0;

  double intent_rate() const { return intent_trials ? double(intent_hits) / double(intent_trials) : 0.0; }
  double slot_rate() const { return slot_trials ? double(slot_hits) / double(slot_trials) : 0.0; }
  bool operator==(const RateEstimate&) const = default;
};

// Corrupts acts[i % size] for i < n_trials with stream Rng::derive(seed, i)
// and counts draws. The parallel and serial versions return equal results.
RateEstimate measure_rates(const ErrorSpec& spec, std::span<const DialogueAct> acts,
                           const kb::KnowledgeBase& kb, std::uint64_t seed, std::size_t n_trials);
RateEstimate measure_rates_serial(const ErrorSpec& spec, std::span<const DialogueAct> acts,
                                  const kb::KnowledgeBase& kb, std::uint64_t seed, std::size_t n_trials);

}  // namespace dlg::error_model
