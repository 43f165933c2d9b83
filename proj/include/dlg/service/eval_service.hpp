#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlg/core/rng.hpp"
#include "dlg/dm/dialogue_manager.hpp"
#include "dlg/kb/knowledge_base.hpp"
#include "dlg/lu/lu_model.hpp"
#include "dlg/nlg/template_nlg.hpp"
#include "dlg/rl/dqn.hpp"

namespace dlg::service {

class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ServiceNotReady : public ServiceError {
 public:
  using ServiceError::ServiceError;
};
class UnknownSession : public ServiceError {
 public:
  using ServiceError::ServiceError;
};
class SessionEnded : public ServiceError {
 public:
  using ServiceError::ServiceError;
};
class OutOfRange : public ServiceError {
 public:
  using ServiceError::ServiceError;
};
class NotEnded : public ServiceError {
 public:
  using ServiceError::ServiceError;
};
class AlreadyRated : public ServiceError {
 public:
  using ServiceError::ServiceError;
};
class StoreError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

enum class AgentKind : std::uint8_t { kRule, kRl };
enum class Status : std::uint8_t { kActive, kEnded, kRated };
std::string_view to_string(AgentKind k);
std::string_view to_string(Status s);
AgentKind agent_kind_from_string(std::string_view s);

struct SessionEvent {
  Speaker speaker = Speaker::kUser;
  std::string text;
  DialogueAct act;  // user: the understood frame; agent: the grounded act
};

struct Session {
  std::string id;
  UserGoal goal;
  AgentKind agent = AgentKind::kRule;
  std::uint64_t seed = 0;
  std::vector<SessionEvent> transcript;
  std::optional<int> rating;
  Status status = Status::kActive;
  bool success = false;  // judged when the session ends
  dm::DialogueState state;
};

// Success as the simulator would judge it: the last booking refers to a
// record, settles the goal constraints, and every goal request was
// answered by some agent inform.
bool judge_transcript(const UserGoal& goal, const std::vector<SessionEvent>& transcript,
                      const kb::KnowledgeBase& kb);

// Append-only JSONL event log. Each append is flushed and synced before it
// returns. A torn final line is ignored on replay.
class EventLog {
 public:
  EventLog(std::filesystem::path path, bool sync = true);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  void append(const nlohmann::json& event);
  std::vector<nlohmann::json> replay() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool sync_;
  std::FILE* file_ = nullptr;
};

// Maps a user utterance to a frame.
using Understander = std::function<DialogueAct(const std::string&)>;
Understander lu_understander(const lu::LuModel& model);

struct ServiceConfig {
  std::filesystem::path log_path = "sessions.jsonl";
  int max_turns = 40;
  std::uint64_t seed = 7;
  bool sync = true;
};

struct Reply {
  std::string agent_text;
  DialogueAct agent_act;
  Status status = Status::kActive;
};

struct RatingResult {
  int rating = 0;
  AgentKind agent = AgentKind::kRule;
  bool success = false;
};

struct AgentSummary {
  std::size_t sessions = 0;  // rated sessions
  double success_rate = 0.0;
  double mean_rating = 0.0;
  std::array<std::size_t, 5> histogram{};  // ratings 1..5
};

struct Summary {
  AgentSummary rule;
  AgentSummary rl;
};

nlohmann::json to_json(const Summary& s);
// Goal and transcript; the agent kind only once the session is rated.
nlohmann::json to_json(const Session& s);

// Sessions pairing a human with a rule or DQN agent over the NL pipeline.
// Thread-safe; events of one session are serialized.
class EvalService {
 public:
  // Without an understander or network the service is not ready; the log
  // is still replayed so stored sessions remain readable.
  EvalService(const kb::KnowledgeBase& kb, std::vector<UserGoal> goals, const nlg::TemplateBank& bank,
              Understander understand, std::optional<rl::QNetwork> net, ServiceConfig config);

  bool ready() const;

  Session create_session();
  // Forces the agent kind; for scripted checks.
  Session create_session(AgentKind agent, const UserGoal& goal);
  Reply post_message(const std::string& id, const std::string& text);
  RatingResult submit_rating(const std::string& id, int rating);
  Session get(const std::string& id) const;
  Summary summary() const;
  std::size_t session_count() const;

 private:
  struct Entry {
    Session session;
    std::unique_ptr<std::mutex> lock = std::make_unique<std::mutex>();
  };

  Entry& find(const std::string& id) const;
  Session create_locked(AgentKind agent, const UserGoal& goal, std::uint64_t seed);
  void apply(const nlohmann::json& event);
  std::size_t choose_action(AgentKind agent, const dm::DialogueState& state) const;
  void finish(Session& s);

  const kb::KnowledgeBase* kb_;
  std::vector<UserGoal> goals_;
  const nlg::TemplateBank* bank_;
  Understander understand_;
  std::optional<rl::QNetwork> net_;
  ServiceConfig config_;
  dm::StateEncoder encoder_;
  EventLog log_;
  mutable std::mutex mu_;  // guards sessions_, created_ and log_ appends
  std::uint64_t created_ = 0;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
};

}  // namespace dlg::service
