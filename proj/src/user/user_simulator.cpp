#include "dlg/user/user_simulator.hpp"

#include <algorithm>

namespace dlg::user {

namespace {

DialogueAct user_act(Intent intent, SlotValues informs = {}, SlotSet requests = {}) {
  return DialogueAct{Speaker::kUser, intent, std::move(informs), std::move(requests)};
}

bool is_request_act(const DialogueAct& a) { return a.intent == Intent::kRequest; }

Slot request_slot(const DialogueAct& a) { return *a.request_slots.begin(); }

void drop_agenda_informs(UserState& state, Slot slot) {
  for (auto& a : state.agenda) {
    if (a.intent == Intent::kInform) a.inform_slots.erase(slot);
  }
  std::erase_if(state.agenda, [](const DialogueAct& a) {
    return a.intent == Intent::kInform && a.inform_slots.empty();
  });
}

// Top of the agenda. Satisfied requests are discarded; an unsatisfied
// request stays until the agent answers it.
DialogueAct pop_agenda(UserState& state) {
  while (!state.agenda.empty()) {
    const DialogueAct top = state.agenda.back();
    if (is_request_act(top)) {
      const Slot s = request_slot(top);
      if (state.satisfied_requests.contains(s)) {
        state.agenda.pop_back();
        continue;
      }
      return top;
    }
    state.agenda.pop_back();
    return top;
  }
  return user_act(Intent::kThanks);
}

std::optional<Slot> first_contradiction(const UserGoal& goal, const SlotValues& informs) {
  for (const auto& [slot, value] : informs) {
    const auto it = goal.inform_slots.find(slot);
    if (it == goal.inform_slots.end() || it->second == kAnything || value == kAnything) continue;
    if (normalize_value(value) != normalize_value(it->second)) return slot;
  }
  return std::nullopt;
}

void record_answers(UserState& state, const SlotValues& informs) {
  for (const auto& [slot, value] : informs) {
    if (state.goal.request_slots.contains(slot) && slot != Slot::kTicket && value != kAnything) {
      state.satisfied_requests[slot] = normalize_value(value);
    }
  }
}

DialogueAct answer_request(UserState& state, Slot s, const SimulatorConfig& config, Rng& rng) {
  const auto& goal = state.goal;
  if (const auto it = goal.inform_slots.find(s); it != goal.inform_slots.end()) {
    drop_agenda_informs(state, s);
    return user_act(Intent::kInform, {{s, it->second}});
  }
  if (goal.request_slots.contains(s)) {
    if (const auto it = state.satisfied_requests.find(s); it != state.satisfied_requests.end()) {
      return user_act(Intent::kInform, {{s, it->second}});
    }
    return user_act(Intent::kRequest, {}, {s});
  }
  if (rng.bernoulli(config.anything_prob)) return user_act(Intent::kInform, {{s, std::string(kAnything)}});
  return user_act(Intent::kNotSure);
}

}  // namespace

std::string_view to_string(Terminal t) {
  switch (t) {
    case Terminal::kNone: return "none";
    case Terminal::kSuccess: return "success";
    case Terminal::kFailure: return "failure";
  }
  return "none";
}

void SimulatorConfig::validate() const {
  if (max_turns < 4) throw std::invalid_argument("max_turns must be at least 4");
  if (first_act_max_constraints < 1) throw std::invalid_argument("first_act_max_constraints must be at least 1");
  if (!(first_act_request_prob >= 0 && first_act_request_prob <= 1)) {
    throw std::invalid_argument("first_act_request_prob must lie in [0, 1]");
  }
  if (!(anything_prob >= 0 && anything_prob <= 1)) throw std::invalid_argument("anything_prob must lie in [0, 1]");
}

nlohmann::json to_json(const SimulatorConfig& c) {
  return {{"max_turns", c.max_turns},
          {"first_act_max_constraints", c.first_act_max_constraints},
          {"first_act_request_prob", c.first_act_request_prob},
          {"anything_prob", c.anything_prob}};
}

SimulatorConfig simulator_config_from_json(const nlohmann::json& j) {
  SimulatorConfig c;
  c.max_turns = j.value("max_turns", c.max_turns);
  c.first_act_max_constraints = j.value("first_act_max_constraints", c.first_act_max_constraints);
  c.first_act_request_prob = j.value("first_act_request_prob", c.first_act_request_prob);
  c.anything_prob = j.value("anything_prob", c.anything_prob);
  c.validate();
  return c;
}

const UserGoal& sample_goal(std::span<const UserGoal> goals, Rng& rng) {
  if (goals.empty()) throw EmptyCorpus("no user goals to sample from");
  return goals[rng.uniform_index(goals.size())];
}

InitResult init_session(const UserGoal& goal, const SimulatorConfig& config, Rng& rng) {
  if (const auto v = validate_goal(goal); !v.empty()) throw std::invalid_argument("invalid goal: " + v.front());
  InitResult out;
  UserState& state = out.state;
  state.goal = goal;
  state.turn = 1;

  state.agenda.push_back(user_act(Intent::kThanks));
  if (goal.request_slots.contains(Slot::kTicket)) state.agenda.push_back(user_act(Intent::kRequest, {}, {Slot::kTicket}));
  std::vector<Slot> extra;
  for (Slot s : goal.request_slots) {
    if (s != Slot::kTicket) extra.push_back(s);
  }
  rng.shuffle(extra);
  for (Slot s : extra) state.agenda.push_back(user_act(Intent::kRequest, {}, {s}));
  std::vector<Slot> constraints;
  for (const auto& [slot, value] : goal.inform_slots) constraints.push_back(slot);
  rng.shuffle(constraints);
  for (Slot s : constraints) state.agenda.push_back(user_act(Intent::kInform, {{s, goal.inform_slots.at(s)}}));

  SlotValues informs;
  const std::size_t want = 1 + rng.uniform_index(static_cast<std::size_t>(config.first_act_max_constraints));
  while (informs.size() < want && state.agenda.back().intent == Intent::kInform) {
    for (const auto& kv : state.agenda.back().inform_slots) informs.insert(kv);
    state.agenda.pop_back();
  }
  std::vector<Slot> requests(goal.request_slots.begin(), goal.request_slots.end());
  if (informs.empty() || rng.bernoulli(config.first_act_request_prob)) {
    out.first_act = user_act(Intent::kRequest, std::move(informs), {requests[rng.uniform_index(requests.size())]});
  } else {
    out.first_act = user_act(Intent::kInform, std::move(informs));
  }
  return out;
}

bool booking_satisfies(const UserGoal& goal, const SlotValues& answered, const DialogueAct& booking,
                       const kb::MovieRecord& record) {
  for (const auto& [slot, value] : goal.inform_slots) {
    if (value == kAnything) continue;
    const std::string want = normalize_value(value);
    if (slot == Slot::kNumberOfPeople) {
      const auto it = booking.inform_slots.find(slot);
      if (it == booking.inform_slots.end() || normalize_value(it->second) != want) return false;
      continue;
    }
    const auto it = record.values.find(slot);
    if (it != record.values.end() && it->second != want) return false;
  }
  if (first_contradiction(goal, booking.inform_slots)) return false;
  for (Slot r : goal.request_slots) {
    if (r == Slot::kTicket) continue;
    const auto got = answered.find(r);
    if (got == answered.end()) return false;
    const auto rec = record.values.find(r);
    if (rec != record.values.end() && rec->second != got->second) return false;
  }
  return true;
}

StepResult step(UserState& state, const DialogueAct& agent_act, const kb::MovieRecord* booked,
                const SimulatorConfig& config, Rng& rng) {
  if (agent_act.speaker != Speaker::kAgent) throw ProtocolError("step expects an agent act");
  if (state.terminal != Terminal::kNone) throw ProtocolError("episode already ended");
  state.turn += 2;

  auto finish = [&](Terminal t, std::string reason, DialogueAct act) {
    state.terminal = t;
    state.reason = std::move(reason);
    return StepResult{std::move(act), true};
  };

  DialogueAct reply;
  const auto task = agent_act.inform_slots.find(Slot::kTaskComplete);
  if (agent_act.intent == Intent::kInform && task != agent_act.inform_slots.end()) {
    if (task->second == kBookingFailed || booked == nullptr) {
      return finish(Terminal::kFailure, "no ticket booked", user_act(Intent::kClosing));
    }
    record_answers(state, agent_act.inform_slots);
    if (booking_satisfies(state.goal, state.satisfied_requests, agent_act, *booked)) {
      return finish(Terminal::kSuccess, "booked", user_act(Intent::kThanks));
    }
    return finish(Terminal::kFailure, "booking does not meet the goal", user_act(Intent::kClosing));
  }

  switch (agent_act.intent) {
    case Intent::kRequest:
      reply = agent_act.request_slots.empty() ? pop_agenda(state)
                                              : answer_request(state, *agent_act.request_slots.begin(), config, rng);
      break;
    case Intent::kInform:
      record_answers(state, agent_act.inform_slots);
      if (const auto bad = first_contradiction(state.goal, agent_act.inform_slots)) {
        reply = user_act(Intent::kDeny, {{*bad, state.goal.inform_slots.at(*bad)}});
      } else {
        reply = pop_agenda(state);
      }
      break;
    case Intent::kConfirmQuestion:
      if (const auto bad = first_contradiction(state.goal, agent_act.inform_slots)) {
        reply = user_act(Intent::kDeny, {{*bad, state.goal.inform_slots.at(*bad)}});
      } else {
        reply = user_act(Intent::kConfirmAnswer);
      }
      break;
    case Intent::kClosing:
      return finish(Terminal::kFailure, "agent closed without booking", user_act(Intent::kClosing));
    default:
      reply = pop_agenda(state);
      break;
  }
  if (state.turn >= config.max_turns) {
    return finish(Terminal::kFailure, "turn budget exhausted", std::move(reply));
  }
  return {std::move(reply), false};
}

}  // namespace dlg::user
