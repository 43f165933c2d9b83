#include "dlg/error/error_model.hpp"

#include <algorithm>

namespace dlg::error_model {

namespace {

constexpr std::string_view kIntentTypeNames[] = {"random", "within_group", "between_group"};
constexpr std::string_view kSlotTypeNames[] = {"random", "deletion", "value", "slot"};

void check_rate(double r, const char* what) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

IntentLabel corrupt_label(const IntentLabel& label, IntentErrorType mode, Rng& rng, bool& skipped) {
  const int group = intent_group(label);
  std::vector<const IntentLabel*> pool;
  for (const auto& candidate : user_label_vocabulary()) {
    if (candidate == label) continue;
    const bool same = intent_group(candidate) == group;
    if ((mode == IntentErrorType::kWithinGroup) == same) pool.push_back(&candidate);
  }
  if (pool.empty()) {
    skipped = true;
    return label;
  }
  return *pool[rng.uniform_index(pool.size())];
}

}  // namespace

std::string_view to_string(IntentErrorType t) { return kIntentTypeNames[static_cast<int>(t)]; }
std::string_view to_string(SlotErrorType t) { return kSlotTypeNames[static_cast<int>(t)]; }

IntentErrorType intent_error_type_from_string(std::string_view s) {
  for (int i = 0; i < 3; ++i) {
    if (kIntentTypeNames[i] == s) return static_cast<IntentErrorType>(i);
  }
  throw std::invalid_argument("unknown intent error type '" + std::string(s) + "'");
}

SlotErrorType slot_error_type_from_string(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (kSlotTypeNames[i] == s) return static_cast<SlotErrorType>(i);
  }
  throw std::invalid_argument("unknown slot error type '" + std::string(s) + "'");
}

nlohmann::json to_json(const ErrorSpec& spec) {
  return {{"intent_type", std::string(to_string(spec.intent_type))},
          {"intent_rate", spec.intent_rate},
          {"slot_type", std::string(to_string(spec.slot_type))},
          {"slot_rate", spec.slot_rate}};
}

ErrorSpec error_spec_from_json(const nlohmann::json& j) {
  ErrorSpec spec;
  spec.intent_type = intent_error_type_from_string(j.at("intent_type").get<std::string>());
  spec.intent_rate = j.at("intent_rate").get<double>();
  spec.slot_type = slot_error_type_from_string(j.at("slot_type").get<std::string>());
  spec.slot_rate = j.at("slot_rate").get<double>();
  validate(spec);
  return spec;
}

void validate(const ErrorSpec& spec) {
  check_rate(spec.intent_rate, "intent_rate");
  check_rate(spec.slot_rate, "slot_rate");
}

int intent_group(const IntentLabel& label) {
  switch (label.intent) {
    case Intent::kInform: return 2;
    case Intent::kRequest: return 3;
    default: return 1;
  }
}

int intent_group(std::string_view label) {
  IntentLabel parsed;
  try {
    parsed = parse_intent_label(label);
  } catch (const SchemaError&) {
    throw UnknownLabel("unknown intent label '" + std::string(label) + "'");
  }
  const auto& vocab = user_label_vocabulary();
  if (std::find(vocab.begin(), vocab.end(), parsed) == vocab.end()) {
    throw UnknownLabel("label '" + std::string(label) + "' is not in the user vocabulary");
  }
  return intent_group(parsed);
}

DialogueAct corrupt(const DialogueAct& act, const ErrorSpec& spec, const kb::KnowledgeBase& kb,
                    Rng& rng, CorruptionReport* report) {
  CorruptionReport local;
  CorruptionReport& rep = report ? *report : local;
  rep = CorruptionReport{};
  DialogueAct out = act;

  if (rng.bernoulli(spec.intent_rate)) {
    rep.intent_drawn = true;
    IntentErrorType mode = spec.intent_type;
    if (mode == IntentErrorType::kRandom) {
      mode = rng.bernoulli(0.5) ? IntentErrorType::kWithinGroup : IntentErrorType::kBetweenGroup;
    }
    rep.intent_mode = mode;
    const IntentLabel old = composite_label(act);
    const IntentLabel noisy = corrupt_label(old, mode, rng, rep.intent_skipped);
    if (!rep.intent_skipped) {
      out = apply_label(act, noisy);
      rep.intent_changed = true;
    }
  }

  const SlotValues original = out.inform_slots;
  rep.slots_eligible = original.size();
  for (const auto& [slot, value] : original) {
    if (!rng.bernoulli(spec.slot_rate)) continue;
    ++rep.slots_drawn;
    SlotErrorType type = spec.slot_type;
    if (type == SlotErrorType::kRandom) type = static_cast<SlotErrorType>(1 + rng.uniform_index(3));

    if (type == SlotErrorType::kDeletion) {
      out.inform_slots.erase(slot);
      ++rep.deletions;
      continue;
    }
    if (type == SlotErrorType::kValue) {
      std::vector<const std::string*> pool;
      for (const auto& v : kb.values_of(slot)) {
        if (v != value) pool.push_back(&v);
      }
      if (pool.empty()) {
        ++rep.slots_skipped;
        continue;
      }
      out.inform_slots[slot] = *pool[rng.uniform_index(pool.size())];
      ++rep.value_swaps;
      continue;
    }
    std::vector<Slot> pool;
    for (const auto& info : all_slots()) {
      const Slot s = info.slot;
      if (s == slot || kb.values_of(s).empty()) continue;
      if (out.inform_slots.contains(s) || out.request_slots.contains(s)) continue;
      pool.push_back(s);
    }
    if (pool.empty()) {
      ++rep.slots_skipped;
      continue;
    }
    const Slot fresh = pool[rng.uniform_index(pool.size())];
    const auto& values = kb.values_of(fresh);
    out.inform_slots.erase(slot);
    out.inform_slots[fresh] = values[rng.uniform_index(values.size())];
    ++rep.slot_swaps;
  }
  return out;
}

namespace {

void tally(RateEstimate& est, const CorruptionReport& rep) {
  ++est.intent_trials;
  est.intent_hits += rep.intent_drawn ? 1 : 0;
  est.slot_trials += rep.slots_eligible;
  est.slot_hits += rep.slots_drawn;
}

}  // namespace

RateEstimate measure_rates_serial(const ErrorSpec& spec, std::span<const DialogueAct> acts,
                                  const kb::KnowledgeBase& kb, std::uint64_t seed, std::size_t n_trials) {
  RateEstimate est;
  if (acts.empty()) return est;
  for (std::size_t i = 0; i < n_trials; ++i) {
    Rng rng(Rng::derive(seed, i));
    CorruptionReport rep;
    corrupt(acts[i % acts.size()], spec, kb, rng, &rep);
    tally(est, rep);
  }
  return est;
}

RateEstimate measure_rates(const ErrorSpec& spec, std::span<const DialogueAct> acts,
                           const kb::KnowledgeBase& kb, std::uint64_t seed, std::size_t n_trials) {
  if (acts.empty()) return {};
  std::size_t it = 0, ih = 0, st = 0, sh = 0;
  const auto n = static_cast<std::int64_t>(n_trials);
#pragma omp parallel for reduction(+ : it, ih, st, sh) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
    CorruptionReport rep;
    corrupt(acts[static_cast<std::size_t>(i) % acts.size()], spec, kb, rng, &rep);
    ++it;
    ih += rep.intent_drawn ? 1 : 0;
    st += rep.slots_eligible;
    sh += rep.slots_drawn;
  }
  return {it, ih, st, sh};
}

}  // namespace dlg::error_model
