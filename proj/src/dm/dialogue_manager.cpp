#include "dlg/dm/dialogue_manager.hpp"

#include <algorithm>
#include <stdexcept>

#include "dlg/core/domain.hpp"

namespace dlg::dm {

namespace {

constexpr ActionKind kGeneralKinds[] = {
    ActionKind::kConfirmQuestion, ActionKind::kConfirmAnswer, ActionKind::kBookTicket,
    ActionKind::kGreeting,        ActionKind::kThanks,        ActionKind::kClosing,
    ActionKind::kDeny,            ActionKind::kMultipleChoice, ActionKind::kNotSure,
};

std::string_view kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::kRequest: return "request";
    case ActionKind::kInform: return "inform";
    case ActionKind::kConfirmQuestion: return "confirm_question";
    case ActionKind::kConfirmAnswer: return "confirm_answer";
    case ActionKind::kBookTicket: return "book_ticket";
    case ActionKind::kGreeting: return "greeting";
    case ActionKind::kThanks: return "thanks";
    case ActionKind::kClosing: return "closing";
    case ActionKind::kDeny: return "deny";
    case ActionKind::kMultipleChoice: return "multiple_choice";
    case ActionKind::kNotSure: return "not_sure";
  }
  return "?";
}

Intent bare_intent(ActionKind k) {
  switch (k) {
    case ActionKind::kConfirmAnswer: return Intent::kConfirmAnswer;
    case ActionKind::kGreeting: return Intent::kGreeting;
    case ActionKind::kThanks: return Intent::kThanks;
    case ActionKind::kClosing: return Intent::kClosing;
    case ActionKind::kDeny: return Intent::kDeny;
    case ActionKind::kMultipleChoice: return Intent::kMultipleChoice;
    default: return Intent::kNotSure;
  }
}

DialogueAct agent_act(Intent intent, SlotValues informs = {}, SlotSet requests = {}) {
  return DialogueAct{Speaker::kAgent, intent, std::move(informs), std::move(requests)};
}

DialogueAct failed_act() {
  return agent_act(Intent::kInform, {{Slot::kTaskComplete, std::string(kBookingFailed)}});
}

bool is_key_slot(Slot s) {
  return std::find(domain::kKeySlots.begin(), domain::kKeySlots.end(), s) != domain::kKeySlots.end();
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string to_string(const AgentAction& a) {
  std::string out(kind_name(a.kind));
  if (a.slot) {
    out += '(';
    out += dlg::to_string(*a.slot);
    out += ')';
  }
  return out;
}

const ActionSet& ActionSet::movie() {
  static const ActionSet set = [] {
    ActionSet s;
    for (Slot slot : domain::kAgentRequestSlots) s.actions_.push_back({ActionKind::kRequest, slot});
    for (Slot slot : domain::kAgentInformSlots) s.actions_.push_back({ActionKind::kInform, slot});
    for (ActionKind k : kGeneralKinds) s.actions_.push_back({k, std::nullopt});
    return s;
  }();
  return set;
}

std::size_t ActionSet::index_of(const AgentAction& a) const {
  const auto it = std::find(actions_.begin(), actions_.end(), a);
  if (it == actions_.end()) throw std::out_of_range("action " + to_string(a) + " is not in the action set");
  return static_cast<std::size_t>(it - actions_.begin());
}

DialogueState initial_state(const kb::KnowledgeBase& kb) {
  DialogueState state;
  state.kb_features = kb.result_features({});
  return state;
}

void track_user(DialogueState& state, const DialogueAct& user_act, const kb::KnowledgeBase& kb) {
  for (const auto& [slot, value] : user_act.inform_slots) {
    if (slot_info(slot).informable) state.confirmed[slot] = normalize_value(value);
  }
  const bool indifferent = user_act.intent == Intent::kNotSure ||
                           (user_act.intent == Intent::kInform && user_act.inform_slots.empty() &&
                            user_act.request_slots.empty());
  if (indifferent && state.last_agent_act && state.last_agent_act->intent == Intent::kRequest) {
    for (Slot s : state.last_agent_act->request_slots) {
      if (slot_info(s).informable) state.confirmed[s] = std::string(kAnything);
    }
  }
  for (Slot s : user_act.request_slots) state.pending_requests.insert(s);
  state.last_user_act = user_act;
  state.kb_features = kb.result_features({state.confirmed});
  ++state.turn;
  ++state.history_length;
}

void track_agent(DialogueState& state, std::size_t action, const DialogueAct& agent_act) {
  state.last_agent_act = agent_act;
  state.last_agent_action = action;
  for (Slot s : agent_act.request_slots) state.agent_requested.insert(s);
  if (agent_act.intent == Intent::kInform) {
    for (const auto& [slot, value] : agent_act.inform_slots) {
      if (slot == Slot::kTaskComplete) {
        state.booked = true;
        continue;
      }
      state.agent_informed[slot] = value;
      state.pending_requests.erase(slot);
    }
  }
  ++state.turn;
  ++state.history_length;
}

kb::SymbolicQuery grounding_query(const DialogueState& state, const kb::KnowledgeBase& kb) {
  kb::SymbolicQuery q{state.confirmed};
  bool extended = false;
  for (const auto& [slot, value] : state.agent_informed) {
    if (!q.constraints.contains(slot)) {
      q.constraints[slot] = value;
      extended = true;
    }
  }
  if (extended && !kb.first_match(q)) return {state.confirmed};
  return q;
}

StateEncoder::StateEncoder(const ActionSet& actions, int max_turns) : actions_(&actions), max_turns_(max_turns) {
  if (max_turns < 1) throw std::invalid_argument("max_turns must be positive");
  const std::pair<const char*, std::size_t> segments[] = {
      {"user_intent", kNumIntents},
      {"user_inform", kNumSlots},
      {"user_request", kNumSlots},
      {"agent_action", actions.size()},
      {"confirmed", kNumSlots},
      {"pending_requests", kNumSlots},
      {"agent_requested", kNumSlots},
      {"agent_informed", kNumSlots},
      {"kb_count", 4},
      {"kb_slot_counts", 4 * domain::kAgentRequestSlots.size()},
      {"turn", 1},
  };
  for (const auto& [name, w] : segments) {
    layout_.push_back({name, width_, w});
    width_ += w;
  }
}

const Segment& StateEncoder::segment(std::string_view name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no segment " + std::string(name));
}

std::uint64_t StateEncoder::layout_hash() const {
  std::uint64_t h = fnv1a("dlg-state-v1");
  for (const auto& s : layout_) h = fnv1a(s.name + ":" + std::to_string(s.width) + ";", h);
  for (const auto& a : actions_->actions()) h = fnv1a(to_string(a) + ",", h);
  return fnv1a("max_turns=" + std::to_string(max_turns_), h);
}

nlohmann::json StateEncoder::layout_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : layout_) segs.push_back({{"name", s.name}, {"offset", s.offset}, {"width", s.width}});
  return {{"width", width_}, {"max_turns", max_turns_}, {"hash", layout_hash()}, {"segments", segs}};
}

std::size_t StateEncoder::bucket(std::size_t count) {
  if (count == 0) return 0;
  if (count == 1) return 1;
  return count <= 4 ? 2 : 3;
}

std::vector<double> StateEncoder::encode(const DialogueState& state) const {
  std::vector<double> out(width_, 0.0);
  encode_into(state, out);
  return out;
}

void StateEncoder::encode_into(const DialogueState& state, std::span<double> out) const {
  if (out.size() != width_) throw std::invalid_argument("encode: output width mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  auto at = [&](std::size_t seg, std::size_t i) -> double& { return out[layout_[seg].offset + i]; };

  if (state.last_user_act) {
    const auto& u = *state.last_user_act;
    at(0, index_of(u.intent)) = 1.0;
    for (const auto& [slot, value] : u.inform_slots) at(1, index_of(slot)) = 1.0;
    for (Slot s : u.request_slots) at(2, index_of(s)) = 1.0;
  }
  if (state.last_agent_action) at(3, *state.last_agent_action) = 1.0;
  for (const auto& [slot, value] : state.confirmed) at(4, index_of(slot)) = 1.0;
  for (Slot s : state.pending_requests) at(5, index_of(s)) = 1.0;
  for (Slot s : state.agent_requested) at(6, index_of(s)) = 1.0;
  for (const auto& [slot, value] : state.agent_informed) at(7, index_of(slot)) = 1.0;

  const auto& f = state.kb_features;
  at(8, bucket(f.count)) = 1.0;
  for (std::size_t i = 0; i < domain::kAgentRequestSlots.size(); ++i) {
    const auto it = f.per_slot_counts.find(domain::kAgentRequestSlots[i]);
    at(9, 4 * i + bucket(it == f.per_slot_counts.end() ? f.count : it->second)) = 1.0;
  }
  at(10, 0) = std::min(1.0, static_cast<double>(state.turn) / static_cast<double>(max_turns_));
}

std::size_t rule_policy(const DialogueState& state, const ActionSet& actions) {
  if (state.booked) return actions.index_of({ActionKind::kThanks, std::nullopt});
  for (Slot s : domain::kRulePriority) {
    if (!state.agent_requested.contains(s)) return actions.index_of({ActionKind::kRequest, s});
  }
  return actions.index_of({ActionKind::kBookTicket, std::nullopt});
}

DialogueAct ground(const AgentAction& action, const DialogueState& state, const kb::KnowledgeBase& kb) {
  switch (action.kind) {
    case ActionKind::kRequest: return agent_act(Intent::kRequest, {}, {*action.slot});
    case ActionKind::kInform: {
      const auto pos = kb.first_match(grounding_query(state, kb));
      if (!pos) return failed_act();
      const auto& rec = kb.records()[*pos];
      const auto it = rec.values.find(*action.slot);
      if (it == rec.values.end()) return failed_act();
      return agent_act(Intent::kInform, {{*action.slot, it->second}});
    }
    case ActionKind::kBookTicket: {
      const auto pos = kb.first_match(grounding_query(state, kb));
      if (!pos) return failed_act();
      const auto& rec = kb.records()[*pos];
      SlotValues informs{{Slot::kTaskComplete, std::to_string(rec.id)}};
      for (Slot s : domain::kKeySlots) {
        const auto rv = rec.values.find(s);
        if (rv == rec.values.end()) continue;
        const auto c = state.confirmed.find(s);
        const bool confirmed = c != state.confirmed.end() && c->second != kAnything;
        if (confirmed || state.agent_informed.contains(s)) informs[s] = rv->second;
      }
      const auto people = state.confirmed.find(Slot::kNumberOfPeople);
      if (people != state.confirmed.end() && people->second != kAnything) {
        informs[Slot::kNumberOfPeople] = people->second;
      }
      return agent_act(Intent::kInform, std::move(informs));
    }
    case ActionKind::kConfirmQuestion: {
      SlotValues informs;
      for (const auto& [slot, value] : state.confirmed) {
        if (is_key_slot(slot) && value != kAnything) informs[slot] = value;
      }
      return agent_act(Intent::kConfirmQuestion, std::move(informs));
    }
    default: return agent_act(bare_intent(action.kind));
  }
}

const kb::MovieRecord* booked_record(const DialogueAct& agent_act, const kb::KnowledgeBase& kb) {
  if (agent_act.intent != Intent::kInform) return nullptr;
  const auto it = agent_act.inform_slots.find(Slot::kTaskComplete);
  if (it == agent_act.inform_slots.end() || it->second == kBookingFailed) return nullptr;
  try {
    return kb.find_record(std::stoull(it->second));
  } catch (const std::exception&) {
    return nullptr;
  }
}

}  // namespace dlg::dm
