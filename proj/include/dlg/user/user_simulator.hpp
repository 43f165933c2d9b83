#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlg/core/dialogue_act.hpp"
#include "dlg/core/rng.hpp"
#include "dlg/kb/knowledge_base.hpp"

namespace dlg::user {

class EmptyCorpus : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Terminal : std::uint8_t { kNone, kSuccess, kFailure };
std::string_view to_string(Terminal t);

struct SimulatorConfig {
  int max_turns = 40;             // both speakers' turns count
  int first_act_max_constraints = 2;
  double first_act_request_prob = 0.5;
  double anything_prob = 0.5;     // otherwise not_sure for slots outside the goal

  void validate() const;  // std::invalid_argument
};

nlohmann::json to_json(const SimulatorConfig& c);
SimulatorConfig simulator_config_from_json(const nlohmann::json& j);

struct UserState {
  UserGoal goal;
  std::vector<DialogueAct> agenda;  // back() is the top
  SlotValues satisfied_requests;
  int turn = 0;
  Terminal terminal = Terminal::kNone;
  std::string reason;  // why the episode ended
};

const UserGoal& sample_goal(std::span<const UserGoal> goals, Rng& rng);  // EmptyCorpus

struct InitResult {
  UserState state;
  DialogueAct first_act;
};

// Agenda from bottom: thanks(), one request act per goal request (ticket
// lowest), one inform act per constraint in shuffled order. The first act
// pops 1..first_act_max_constraints informs and may mention one request.
InitResult init_session(const UserGoal& goal, const SimulatorConfig& config, Rng& rng);

struct StepResult {
  DialogueAct user_act;
  bool done = false;
};

// `booked` is the record a booking act refers to, or nullptr.
StepResult step(UserState& state, const DialogueAct& agent_act, const kb::MovieRecord* booked,
                const SimulatorConfig& config, Rng& rng);

// True when `booking` settles the goal: every constraint the record stores
// matches, the party size matches, and every extra request was answered
// with the record's value.
bool booking_satisfies(const UserGoal& goal, const SlotValues& answered, const DialogueAct& booking,
                       const kb::MovieRecord& record);

}  // namespace dlg::user
