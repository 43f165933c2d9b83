#include "dlg/env/environment.hpp"

#include "dlg/core/text.hpp"

namespace dlg::env {

std::string_view to_string(Level level) { return level == Level::kFrame ? "frame" : "natural_language"; }

Level level_from_string(std::string_view s) {
  if (s == "frame") return Level::kFrame;
  if (s == "natural_language" || s == "nl") return Level::kNaturalLanguage;
  throw std::invalid_argument("unknown level '" + std::string(s) + "'");
}

double reward(Outcome outcome, int max_turns) {
  switch (outcome) {
    case Outcome::kSuccess: return 2.0 * max_turns;
    case Outcome::kFailure: return -static_cast<double>(max_turns);
    default: return -1.0;
  }
}

nlohmann::json to_json(const TranscriptEvent& e) {
  nlohmann::json j{{"turn", e.turn}, {"speaker", std::string(to_string(e.speaker))}, {"act", render_act(e.act)}};
  if (e.heard) j["heard"] = render_act(*e.heard);
  if (!e.text.empty()) j["text"] = e.text;
  return j;
}

Environment::Environment(const kb::KnowledgeBase& kb, std::span<const UserGoal> goals, EnvConfig config,
                         const nlg::TemplateBank* bank, const lu::LuModel* lu)
    : kb_(&kb), goals_(goals), config_(config), bank_(bank), lu_(lu),
      encoder_(dm::ActionSet::movie(), config.sim.max_turns) {
  config_.sim.validate();
  error_model::validate(config_.errors);
  if (goals_.empty()) throw user::EmptyCorpus("environment needs at least one goal");
  if (config_.level == Level::kNaturalLanguage && (!bank_ || !lu_)) {
    throw std::invalid_argument("natural-language level needs a template bank and an LU model");
  }
}

double Environment::reachable_fraction() const { return kb::reachable_fraction(*kb_, {goals_.begin(), goals_.end()}); }

DialogueAct Environment::perceive(const DialogueAct& user_act, Rng& rng, std::string* text) const {
  if (config_.level == Level::kFrame) return error_model::corrupt(user_act, config_.errors, *kb_, rng);
  const std::string utterance = nlg::realize(user_act, *bank_, rng);
  if (text) *text = utterance;
  const auto tokens = tokenize(utterance);
  const auto pred = lu_->predict(tokens);
  return lu::frame_from_prediction(tokens, pred.tags, pred.intent);
}

const UserGoal& episode_goal(const Environment& env, std::uint64_t seed, std::size_t i) {
  Rng rng(Rng::derive(seed, 0x60a1000000ULL + i));
  return user::sample_goal(env.goals(), rng);
}

Episode::Episode(const Environment& env, const UserGoal& goal, std::uint64_t seed, bool record)
    : env_(&env), rng_(seed), record_(record) {
  auto init = user::init_session(goal, env.config().sim, rng_);
  user_ = std::move(init.state);
  state_ = dm::initial_state(env.kb());
  hear(init.first_act);
}

void Episode::hear(const DialogueAct& user_act) {
  std::string text;
  const DialogueAct heard = env_->perceive(user_act, rng_, record_ ? &text : nullptr);
  if (record_) transcript_.push_back({user_.turn, Speaker::kUser, user_act, heard, text});
  dm::track_user(state_, heard, env_->kb());
}

StepOutcome Episode::step(std::size_t action) {
  if (done_) throw std::logic_error("step on a finished episode");
  const auto& actions = env_->actions();
  if (action >= actions.size()) throw std::out_of_range("action index out of range");
  const DialogueAct agent_act = dm::ground(actions.at(action), state_, env_->kb());
  if (record_) {
    std::string text;
    if (env_->bank()) {
      Rng nlg_rng(Rng::derive(user_.turn, action));
      text = nlg::realize(agent_act, *env_->bank(), nlg_rng);
    }
    transcript_.push_back({user_.turn + 1, Speaker::kAgent, agent_act, std::nullopt, text});
  }
  dm::track_agent(state_, action, agent_act);
  const auto* booked = dm::booked_record(agent_act, env_->kb());
  auto res = user::step(user_, agent_act, booked, env_->config().sim, rng_);

  StepOutcome out;
  if (res.done) {
    done_ = true;
    outcome_ = user_.terminal == user::Terminal::kSuccess ? Outcome::kSuccess : Outcome::kFailure;
    if (record_) transcript_.push_back({user_.turn, Speaker::kUser, res.user_act, std::nullopt, ""});
    out = {reward(outcome_, env_->config().sim.max_turns), true, outcome_};
  } else {
    hear(res.user_act);
    out = {reward(Outcome::kOngoing, env_->config().sim.max_turns), false, Outcome::kOngoing};
  }
  total_reward_ += out.reward;
  return out;
}

}  // namespace dlg::env
