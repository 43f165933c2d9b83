#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlg/core/dialogue_act.hpp"

namespace dlg {

// Composite intent label used by the tagger and the error model, e.g.
// `request_starttime`, `inform_moviename`, `thanks`. Request acts are
// labelled by their first request slot, inform acts by their first inform
// slot (slot-name order); other intents are labelled by the bare intent.
struct IntentLabel {
  Intent intent = Intent::kInform;
  std::optional<Slot> focus;

  bool operator==(const IntentLabel&) const = default;
};

std::string to_string(const IntentLabel& label);
IntentLabel parse_intent_label(std::string_view text);  // SchemaError

IntentLabel composite_label(const DialogueAct& act);

// Rewrites the intent of `act` to `label`, keeping inform slots. The old
// request focus is dropped and the new focus added when the label is a
// request whose slot is not already informed.
DialogueAct apply_label(const DialogueAct& act, const IntentLabel& label);

// Full user-side label vocabulary in a fixed order.
const std::vector<IntentLabel>& user_label_vocabulary();

}  // namespace dlg
