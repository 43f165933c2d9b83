#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlg/core/dialogue_act.hpp"
#include "dlg/kb/knowledge_base.hpp"

namespace dlg::dm {

enum class ActionKind : std::uint8_t {
  kRequest,
  kInform,
  kConfirmQuestion,
  kConfirmAnswer,
  kBookTicket,
  kGreeting,
  kThanks,
  kClosing,
  kDeny,
  kMultipleChoice,
  kNotSure,
};

struct AgentAction {
  ActionKind kind = ActionKind::kGreeting;
  std::optional<Slot> slot;  // set for kRequest and kInform

  bool operator==(const AgentAction&) const = default;
};

std::string to_string(const AgentAction& a);

// Fixed ordered action set: one request per askable slot, one inform per
// database slot, then the general acts.
class ActionSet {
 public:
  static const ActionSet& movie();

  std::size_t size() const { return actions_.size(); }
  const AgentAction& at(std::size_t index) const { return actions_.at(index); }
  std::size_t index_of(const AgentAction& a) const;  // std::out_of_range
  std::span<const AgentAction> actions() const { return actions_; }

 private:
  std::vector<AgentAction> actions_;
};

struct DialogueState {
  std::optional<DialogueAct> last_user_act;
  std::optional<DialogueAct> last_agent_act;
  std::optional<std::size_t> last_agent_action;
  SlotValues confirmed;        // user constraints, last write wins
  SlotSet pending_requests;    // asked by the user, not yet informed
  SlotSet agent_requested;     // slots the agent has asked for
  SlotValues agent_informed;   // values the agent has offered
  kb::ResultFeatures kb_features;
  int turn = 1;
  int history_length = 0;
  bool booked = false;

  bool operator==(const DialogueState&) const = default;
};

// Fresh state with the KB features of the empty query.
DialogueState initial_state(const kb::KnowledgeBase& kb);

// Merges a user frame: informable inform/deny slots into `confirmed`,
// request slots into `pending_requests`. A not_sure or slotless inform right
// after an agent request marks that slot as `anything`.
void track_user(DialogueState& state, const DialogueAct& user_act, const kb::KnowledgeBase& kb);
void track_agent(DialogueState& state, std::size_t action, const DialogueAct& agent_act);

// Constraints plus the agent's own offers where they do not clash; the
// offers are dropped when the combination matches nothing.
kb::SymbolicQuery grounding_query(const DialogueState& state, const kb::KnowledgeBase& kb);

struct Segment {
  std::string name;
  std::size_t offset;
  std::size_t width;
};

class StateEncoder {
 public:
  StateEncoder(const ActionSet& actions, int max_turns);

  std::size_t width() const { return width_; }
  const std::vector<Segment>& layout() const { return layout_; }
  const Segment& segment(std::string_view name) const;
  // Stable digest of the layout and max_turns; checkpoints record it.
  std::uint64_t layout_hash() const;
  nlohmann::json layout_json() const;

  // Every entry lies in [0, 1].
  std::vector<double> encode(const DialogueState& state) const;
  void encode_into(const DialogueState& state, std::span<double> out) const;

  static std::size_t bucket(std::size_t count);  // 0, 1, 2-4, 5+

 private:
  const ActionSet* actions_;
  int max_turns_;
  std::vector<Segment> layout_;
  std::size_t width_ = 0;
};

// Thanks once booked; otherwise requests the first priority slot the agent
// has not asked for yet; books once all have been asked.
std::size_t rule_policy(const DialogueState& state, const ActionSet& actions);

// Turns an action into an agent act using the KB. Informs and bookings use
// the first record matching grounding_query; with no match they become
// inform(taskcomplete=failed). A booking carries taskcomplete=<record id>.
DialogueAct ground(const AgentAction& action, const DialogueState& state, const kb::KnowledgeBase& kb);

// Record a booking act refers to, or nullptr.
const kb::MovieRecord* booked_record(const DialogueAct& agent_act, const kb::KnowledgeBase& kb);

}  // namespace dlg::dm
