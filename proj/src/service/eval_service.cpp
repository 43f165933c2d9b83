#include "dlg/service/eval_service.hpp"

#include <unistd.h>

#include <fstream>
#include <iomanip>
#include <sstream>

#include "dlg/core/text.hpp"
#include "dlg/user/user_simulator.hpp"

namespace dlg::service {

namespace {

constexpr std::uint64_t kCreateStream = 0x5e55000000ULL;

std::string make_id(std::uint64_t seed, std::uint64_t n) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << Rng::derive(seed, kCreateStream + n);
  return s.str();
}

bool is_booking(const DialogueAct& act) {
  return act.speaker == Speaker::kAgent && act.intent == Intent::kInform &&
         act.inform_slots.contains(Slot::kTaskComplete);
}

std::string_view status_name(Status s) {
  switch (s) {
    case Status::kActive: return "active";
    case Status::kEnded: return "ended";
    case Status::kRated: return "rated";
  }
  return "active";
}

nlohmann::json event_json(const SessionEvent& e) {
  return {{"speaker", e.speaker == Speaker::kUser ? "user" : "agent"}, {"text", e.text}, {"act", to_json(e.act)}};
}

}  // namespace

std::string_view to_string(AgentKind k) { return k == AgentKind::kRule ? "rule" : "rl"; }
std::string_view to_string(Status s) { return status_name(s); }

AgentKind agent_kind_from_string(std::string_view s) {
  if (s == "rule") return AgentKind::kRule;
  if (s == "rl") return AgentKind::kRl;
  throw std::invalid_argument("unknown agent kind '" + std::string(s) + "'");
}

bool judge_transcript(const UserGoal& goal, const std::vector<SessionEvent>& transcript,
                      const kb::KnowledgeBase& kb) {
  SlotValues answered;
  for (const auto& e : transcript) {
    if (e.speaker != Speaker::kAgent || e.act.intent != Intent::kInform) continue;
    if (is_booking(e.act)) {
      const auto* record = dm::booked_record(e.act, kb);
      if (record == nullptr) return false;
      for (const auto& [slot, value] : e.act.inform_slots) {
        if (slot != Slot::kTaskComplete) answered[slot] = value;
      }
      return user::booking_satisfies(goal, answered, e.act, *record);
    }
    for (const auto& [slot, value] : e.act.inform_slots) answered[slot] = value;
  }
  return false;
}

EventLog::EventLog(std::filesystem::path path, bool sync) : path_(std::move(path)), sync_(sync) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  file_ = std::fopen(path_.c_str(), "a");
  if (file_ == nullptr) throw StoreError("cannot open event log " + path_.string());
}

EventLog::~EventLog() {
  if (file_ != nullptr) std::fclose(file_);
}

void EventLog::append(const nlohmann::json& event) {
  const std::string line = event.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw StoreError("event log write failed");
  }
  if (sync_ && ::fsync(::fileno(file_)) != 0) throw StoreError("event log sync failed");
}

std::vector<nlohmann::json> EventLog::replay() const {
  std::ifstream in(path_);
  std::vector<nlohmann::json> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      events.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error&) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn tail
      throw StoreError("corrupt event log line in " + path_.string());
    }
  }
  return events;
}

Understander lu_understander(const lu::LuModel& model) {
  return [&model](const std::string& text) {
    const auto tokens = tokenize(text);
    const auto pred = model.predict(tokens);
    return lu::frame_from_prediction(tokens, pred.tags, pred.intent);
  };
}

nlohmann::json to_json(const Summary& s) {
  auto one = [](const AgentSummary& a) {
    return nlohmann::json{{"sessions", a.sessions},
                          {"success_rate", a.success_rate},
                          {"mean_rating", a.mean_rating},
                          {"histogram", a.histogram}};
  };
  return {{"rule", one(s.rule)}, {"rl", one(s.rl)}};
}

nlohmann::json to_json(const Session& s) {
  nlohmann::json transcript = nlohmann::json::array();
  for (const auto& e : s.transcript) transcript.push_back(event_json(e));
  nlohmann::json j{{"id", s.id},
                   {"goal", to_json(s.goal)},
                   {"status", std::string(to_string(s.status))},
                   {"transcript", transcript}};
  if (s.status != Status::kActive) j["success"] = s.success;
  if (s.rating) {
    j["rating"] = *s.rating;
    j["agent"] = std::string(to_string(s.agent));
  }
  return j;
}

EvalService::EvalService(const kb::KnowledgeBase& kb, std::vector<UserGoal> goals, const nlg::TemplateBank& bank,
                         Understander understand, std::optional<rl::QNetwork> net, ServiceConfig config)
    : kb_(&kb),
      goals_(std::move(goals)),
      bank_(&bank),
      understand_(std::move(understand)),
      net_(std::move(net)),
      config_(std::move(config)),
      encoder_(dm::ActionSet::movie(), config_.max_turns),
      log_(config_.log_path, config_.sync) {
  if (net_ && (net_->inputs() != encoder_.width() || net_->outputs() != dm::ActionSet::movie().size())) {
    throw rl::ShapeMismatch("checkpoint does not match the state encoder");
  }
  for (const auto& event : log_.replay()) apply(event);
}

bool EvalService::ready() const { return static_cast<bool>(understand_) && net_.has_value() && !goals_.empty(); }

EvalService::Entry& EvalService::find(const std::string& id) const {
  std::lock_guard g(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession("unknown session '" + id + "'");
  return *it->second;
}

void EvalService::apply(const nlohmann::json& ev) {
  const std::string type = ev.at("type").get<std::string>();
  const std::string id = ev.at("id").get<std::string>();
  if (type == "create") {
    auto entry = std::make_unique<Entry>();
    Session& s = entry->session;
    s.id = id;
    s.goal = goal_from_json(ev.at("goal"));
    s.agent = agent_kind_from_string(ev.at("agent").get<std::string>());
    s.seed = ev.at("seed").get<std::uint64_t>();
    s.state = dm::initial_state(*kb_);
    sessions_[id] = std::move(entry);
    ++created_;
    return;
  }
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw StoreError("event for unknown session " + id);
  Session& s = it->second->session;
  if (type == "user") {
    const DialogueAct frame = act_from_json(ev.at("frame"));
    dm::track_user(s.state, frame, *kb_);
    s.transcript.push_back({Speaker::kUser, ev.at("text").get<std::string>(), frame});
  } else if (type == "agent") {
    const DialogueAct act = act_from_json(ev.at("act"));
    dm::track_agent(s.state, ev.at("action").get<std::size_t>(), act);
    s.transcript.push_back({Speaker::kAgent, ev.at("text").get<std::string>(), act});
  } else if (type == "end") {
    s.status = Status::kEnded;
    s.success = ev.at("success").get<bool>();
  } else if (type == "rating") {
    s.status = Status::kRated;
    s.rating = ev.at("rating").get<int>();
  } else {
    throw StoreError("unknown event type '" + type + "'");
  }
}

Session EvalService::create_locked(AgentKind agent, const UserGoal& goal, std::uint64_t seed) {
  std::string id = make_id(config_.seed, created_);
  for (std::uint64_t k = 1; sessions_.contains(id); ++k) id = make_id(config_.seed ^ k, created_);
  const nlohmann::json ev{{"type", "create"},
                          {"id", id},
                          {"goal", to_json(goal)},
                          {"agent", std::string(to_string(agent))},
                          {"seed", seed}};
  log_.append(ev);
  apply(ev);
  return sessions_.at(id)->session;
}

Session EvalService::create_session() {
  if (!ready()) throw ServiceNotReady("no trained policy or tagger loaded");
  std::lock_guard g(mu_);
  Rng rng(Rng::derive(config_.seed, kCreateStream + 0x100000000ULL + created_));
  const AgentKind agent = rng.bernoulli(0.5) ? AgentKind::kRule : AgentKind::kRl;
  const UserGoal& goal = user::sample_goal(goals_, rng);
  return create_locked(agent, goal, rng.next());
}

Session EvalService::create_session(AgentKind agent, const UserGoal& goal) {
  if (!ready()) throw ServiceNotReady("no trained policy or tagger loaded");
  std::lock_guard g(mu_);
  return create_locked(agent, goal, Rng::derive(config_.seed, created_));
}

std::size_t EvalService::choose_action(AgentKind agent, const dm::DialogueState& state) const {
  if (agent == AgentKind::kRule) return dm::rule_policy(state, dm::ActionSet::movie());
  return rl::argmax(net_->q_values(encoder_.encode(state)));
}

Reply EvalService::post_message(const std::string& id, const std::string& text) {
  if (!ready()) throw ServiceNotReady("no trained policy or tagger loaded");
  Entry& entry = find(id);
  std::lock_guard session_guard(*entry.lock);
  Session& s = entry.session;
  if (s.status != Status::kActive) throw SessionEnded("session " + id + " has ended");

  DialogueAct frame = understand_(text);
  frame.speaker = Speaker::kUser;
  dm::DialogueState after_user = s.state;
  dm::track_user(after_user, frame, *kb_);
  const std::size_t action = choose_action(s.agent, after_user);
  const DialogueAct agent_act = dm::ground(dm::ActionSet::movie().at(action), after_user, *kb_);
  std::string agent_text;
  try {
    Rng rng(Rng::derive(s.seed, s.transcript.size()));
    agent_text = nlg::realize(agent_act, *bank_, rng);
  } catch (const nlg::NoTemplate&) {
    agent_text = render_act(agent_act);
  }

  const nlohmann::json user_ev{{"type", "user"}, {"id", id}, {"text", text}, {"frame", to_json(frame)}};
  const nlohmann::json agent_ev{
      {"type", "agent"}, {"id", id}, {"text", agent_text}, {"act", to_json(agent_act)}, {"action", action}};
  {
    std::lock_guard g(mu_);
    log_.append(user_ev);
    apply(user_ev);
    log_.append(agent_ev);
    apply(agent_ev);
  }

  const bool closing = agent_act.intent == Intent::kClosing;
  const bool thanked_after_booking = agent_act.intent == Intent::kThanks && s.state.booked;
  const bool out_of_turns = static_cast<int>(s.transcript.size()) >= config_.max_turns;
  if (closing || thanked_after_booking || out_of_turns) finish(s);
  return {agent_text, agent_act, s.status};
}

void EvalService::finish(Session& s) {
  const nlohmann::json ev{{"type", "end"}, {"id", s.id}, {"success", judge_transcript(s.goal, s.transcript, *kb_)}};
  std::lock_guard g(mu_);
  log_.append(ev);
  apply(ev);
}

RatingResult EvalService::submit_rating(const std::string& id, int rating) {
  Entry& entry = find(id);
  std::lock_guard session_guard(*entry.lock);
  Session& s = entry.session;
  if (rating < 1 || rating > 5) throw OutOfRange("rating must be between 1 and 5");
  if (s.status == Status::kActive) throw NotEnded("session " + id + " is still active");
  if (s.status == Status::kRated) throw AlreadyRated("session " + id + " is already rated");
  const nlohmann::json ev{{"type", "rating"}, {"id", id}, {"rating", rating}};
  {
    std::lock_guard g(mu_);
    log_.append(ev);
    apply(ev);
  }
  return {rating, s.agent, s.success};
}

Session EvalService::get(const std::string& id) const {
  Entry& entry = find(id);
  std::lock_guard session_guard(*entry.lock);
  return entry.session;
}

std::size_t EvalService::session_count() const {
  std::lock_guard g(mu_);
  return sessions_.size();
}

Summary EvalService::summary() const {
  std::vector<Session> rated;
  {
    std::lock_guard g(mu_);
    for (const auto& [id, entry] : sessions_) {
      if (entry->session.status == Status::kRated) rated.push_back(entry->session);
    }
  }
  Summary out;
  std::size_t rule_ok = 0, rl_ok = 0;
  double rule_sum = 0, rl_sum = 0;
  for (const auto& s : rated) {
    AgentSummary& a = s.agent == AgentKind::kRule ? out.rule : out.rl;
    ++a.sessions;
    ++a.histogram[static_cast<std::size_t>(*s.rating - 1)];
    (s.agent == AgentKind::kRule ? rule_ok : rl_ok) += s.success ? 1 : 0;
    (s.agent == AgentKind::kRule ? rule_sum : rl_sum) += *s.rating;
  }
  auto fill = [](AgentSummary& a, std::size_t ok, double sum) {
    if (a.sessions == 0) return;
    a.success_rate = static_cast<double>(ok) / static_cast<double>(a.sessions);
    a.mean_rating = sum / static_cast<double>(a.sessions);
  };
  fill(out.rule, rule_ok, rule_sum);
  fill(out.rl, rl_ok, rl_sum);
  return out;
}

}  // namespace dlg::service
