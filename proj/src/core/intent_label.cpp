#include "dlg/core/intent_label.hpp"

#include <algorithm>

namespace dlg {

namespace {

std::optional<Slot> first_by_name(const auto& slots, auto key) {
  std::optional<Slot> best;
  for (const auto& item : slots) {
    const Slot s = key(item);
    if (!best || to_string(s) < to_string(*best)) best = s;
  }
  return best;
}

bool user_facing_request(Slot s) {
  return slot_info(s).requestable && s != Slot::kTaskComplete && s != Slot::kResult &&
         s != Slot::kMcList;
}

}  // namespace

std::string to_string(const IntentLabel& label) {
  std::string out(to_string(label.intent));
  if (label.focus) {
    out += '_';
    out += to_string(*label.focus);
  }
  return out;
}

IntentLabel parse_intent_label(std::string_view text) {
  if (auto intent = find_intent(text)) return {*intent, std::nullopt};
  for (Intent intent : {Intent::kRequest, Intent::kInform}) {
    const std::string prefix = std::string(to_string(intent)) + "_";
    if (text.starts_with(prefix)) {
      return {intent, slot_from_string(text.substr(prefix.size()))};
    }
  }
  throw SchemaError("unknown intent label '" + std::string(text) + "'");
}

IntentLabel composite_label(const DialogueAct& act) {
  if (act.intent == Intent::kRequest) {
    return {act.intent, first_by_name(act.request_slots, [](Slot s) { return s; })};
  }
  if (act.intent == Intent::kInform) {
    return {act.intent, first_by_name(act.inform_slots, [](const auto& kv) { return kv.first; })};
  }
  return {act.intent, std::nullopt};
}

DialogueAct apply_label(const DialogueAct& act, const IntentLabel& label) {
  DialogueAct out = act;
  const IntentLabel old = composite_label(act);
  if (old.intent == Intent::kRequest && old.focus) out.request_slots.erase(*old.focus);
  out.intent = label.intent;
  if (label.intent == Intent::kRequest && label.focus && !out.inform_slots.contains(*label.focus)) {
    out.request_slots.insert(*label.focus);
  }
  return out;
}

const std::vector<IntentLabel>& user_label_vocabulary() {
  static const std::vector<IntentLabel> vocab = [] {
    std::vector<IntentLabel> v;
    for (Intent intent : all_intents()) {
      if (intent == Intent::kRequest || intent == Intent::kInform) continue;
      v.push_back({intent, std::nullopt});
    }
    for (const auto& info : all_slots()) {
      if (info.informable) v.push_back({Intent::kInform, info.slot});
    }
    for (const auto& info : all_slots()) {
      if (user_facing_request(info.slot)) v.push_back({Intent::kRequest, info.slot});
    }
    return v;
  }();
  return vocab;
}

}  // namespace dlg
