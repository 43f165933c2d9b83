#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlg/dm/dialogue_manager.hpp"
#include "dlg/error/error_model.hpp"
#include "dlg/lu/lu_model.hpp"
#include "dlg/nlg/template_nlg.hpp"
#include "dlg/user/user_simulator.hpp"

namespace dlg::env {

enum class Level : std::uint8_t { kFrame, kNaturalLanguage };
std::string_view to_string(Level level);
Level level_from_string(std::string_view s);

enum class Outcome : std::uint8_t { kOngoing, kSuccess, kFailure };

// -1 per ongoing turn, +2L on success, -L on failure, L = max_turns.
double reward(Outcome outcome, int max_turns);

struct EnvConfig {
  user::SimulatorConfig sim;
  error_model::ErrorSpec errors;  // frame level only
  Level level = Level::kFrame;
};

struct TranscriptEvent {
  int turn = 0;
  Speaker speaker = Speaker::kUser;
  DialogueAct act;                   // what the speaker meant
  std::optional<DialogueAct> heard;  // user act as seen by the tracker
  std::string text;                  // natural-language level only
};

nlohmann::json to_json(const TranscriptEvent& e);

// Shared read-only world: KB, goals, and the NL components when used.
class Environment {
 public:
  Environment(const kb::KnowledgeBase& kb, std::span<const UserGoal> goals, EnvConfig config,
              const nlg::TemplateBank* bank = nullptr, const lu::LuModel* lu = nullptr);

  const kb::KnowledgeBase& kb() const { return *kb_; }
  std::span<const UserGoal> goals() const { return goals_; }
  const EnvConfig& config() const { return config_; }
  const dm::ActionSet& actions() const { return dm::ActionSet::movie(); }
  const dm::StateEncoder& encoder() const { return encoder_; }
  const nlg::TemplateBank* bank() const { return bank_; }
  const lu::LuModel* lu() const { return lu_; }

  // Reachable share of the goal list.
  double reachable_fraction() const;

  // Passes a user act through the error model or NLG + LU.
  DialogueAct perceive(const DialogueAct& user_act, Rng& rng, std::string* text) const;

 private:
  const kb::KnowledgeBase* kb_;
  std::span<const UserGoal> goals_;
  EnvConfig config_;
  const nlg::TemplateBank* bank_;
  const lu::LuModel* lu_;
  dm::StateEncoder encoder_;
};

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  Outcome outcome = Outcome::kOngoing;
};

// One dialogue. The agent acts on state(); the simulator, noise and tracker
// run inside step(). Deterministic in (goal, seed, action sequence).
class Episode {
 public:
  Episode(const Environment& env, const UserGoal& goal, std::uint64_t seed, bool record = false);

  const dm::DialogueState& state() const { return state_; }
  const user::UserState& user_state() const { return user_; }
  bool done() const { return done_; }
  Outcome outcome() const { return outcome_; }
  int turns() const { return user_.turn; }
  double total_reward() const { return total_reward_; }
  const std::vector<TranscriptEvent>& transcript() const { return transcript_; }

  StepOutcome step(std::size_t action);

 private:
  void hear(const DialogueAct& user_act);

  const Environment* env_;
  Rng rng_;
  user::UserState user_;
  dm::DialogueState state_;
  bool done_ = false;
  bool record_ = false;
  Outcome outcome_ = Outcome::kOngoing;
  double total_reward_ = 0.0;
  std::vector<TranscriptEvent> transcript_;
};

// Goal for evaluation episode i under `seed`.
const UserGoal& episode_goal(const Environment& env, std::uint64_t seed, std::size_t i);

}  // namespace dlg::env
