#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dlg/core/schema.hpp"

namespace dlg {

enum class Speaker : std::uint8_t { kUser, kAgent };

std::string_view to_string(Speaker speaker);

using SlotValues = std::map<Slot, std::string>;
using SlotSet = std::set<Slot>;

struct DialogueAct {
  Speaker speaker = Speaker::kUser;
  Intent intent = Intent::kInform;
  SlotValues inform_slots;
  SlotSet request_slots;

  bool operator==(const DialogueAct&) const = default;
};

// Returns every invariant violation of `act`; empty means valid.
// Non-requestable slots may only be requested by the agent.
std::vector<std::string> validate_act(const DialogueAct& act);

// Canonical text: `intent(req;req;slot=value;slot=value)`, request slots
// first, each group sorted by slot name.
std::string render_act(const DialogueAct& act);

// Inverse of render_act. Whitespace around tokens is ignored.
DialogueAct parse_act(std::string_view text, Speaker speaker = Speaker::kUser);

struct UserGoal {
  SlotValues inform_slots;
  SlotSet request_slots;

  bool operator==(const UserGoal&) const = default;
};

std::vector<std::string> validate_goal(const UserGoal& goal);

// {"inform_slots": {...}, "request_slots": {"ticket": "UNK", ...}}
nlohmann::json to_json(const UserGoal& goal);
UserGoal goal_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DialogueAct& act);
DialogueAct act_from_json(const nlohmann::json& j);

// Lowercases and trims; slot values compare in this form.
std::string normalize_value(std::string_view value);

}  // namespace dlg
