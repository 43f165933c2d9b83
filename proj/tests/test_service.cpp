#include <gtest/gtest.h>

#include <httplib.h>

#include <fstream>
#include <set>
#include <thread>

#include "dlg/service/eval_service.hpp"
#include "dlg/service/http_server.hpp"
#include "fixtures.hpp"

using namespace dlg;
using namespace dlg::service;

namespace {

// Reads the canonical act text a scripted user types.
DialogueAct oracle_understand(const std::string& text) {
  auto act = parse_act(text);
  act.speaker = Speaker::kUser;
  return act;
}

rl::QNetwork shaped_net(std::uint64_t seed = 1) {
  const dm::StateEncoder enc(dm::ActionSet::movie(), 40);
  return rl::QNetwork::random(enc.width(), 8, dm::ActionSet::movie().size(), seed);
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("dlg_test_service_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  ServiceConfig config(bool sync = true) const {
    ServiceConfig c;
    c.log_path = dir_ / "sessions.jsonl";
    c.sync = sync;
    return c;
  }

  std::unique_ptr<EvalService> make(bool sync = true, bool with_net = true) const {
    return std::make_unique<EvalService>(base_, goals_, bank_, oracle_understand,
                                         with_net ? std::optional(shaped_net()) : std::nullopt, config(sync));
  }

  // Rule-agent dialogue for the left sample goal.
  static std::vector<std::string> left_script() {
    return {"request(ticket;city=seattle;numberofpeople=2)",
            "inform(moviename=zoolander 2)",
            "inform(starttime=9:25 pm)",
            "inform(city=seattle)",
            "inform(date=tomorrow)",
            "inform(theater=regal meridian 16)",
            "inform(numberofpeople=2)",
            "thanks()"};
  }

  std::filesystem::path dir_;
  kb::KnowledgeBase base_ = test::sample_kb();
  std::vector<UserGoal> goals_ = {test::left_goal(), test::right_goal()};
  nlg::TemplateBank bank_ = nlg::default_template_bank();
};

}  // namespace

TEST_F(ServiceTest, IdsAreUniqueHexAndDeterministic) {
  std::vector<std::string> first;
  {
    auto svc = make(false);
    for (int i = 0; i < 50; ++i) first.push_back(svc->create_session().id);
  }
  std::set<std::string> unique(first.begin(), first.end());
  EXPECT_EQ(unique.size(), first.size());
  for (const auto& id : first) {
    ASSERT_FALSE(id.empty());
    EXPECT_EQ(id.find_first_not_of("0123456789abcdef"), std::string::npos) << id;
  }
  std::filesystem::remove(dir_ / "sessions.jsonl");
  auto again = make(false);
  for (const auto& id : first) EXPECT_EQ(again->create_session().id, id);
}

TEST_F(ServiceTest, AgentAssignmentIsFair) {
  auto svc = make(false);
  std::size_t rl = 0;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) rl += svc->create_session().agent == AgentKind::kRl;
  EXPECT_NEAR(static_cast<double>(rl) / n, 0.5, 0.02);
  EXPECT_EQ(svc->session_count(), n);
}

TEST_F(ServiceTest, NotReadyWithoutNetwork) {
  auto svc = make(true, false);
  EXPECT_FALSE(svc->ready());
  EXPECT_THROW(svc->create_session(), ServiceNotReady);
  EXPECT_TRUE(make(true, true)->ready());
}

TEST_F(ServiceTest, RejectsMisshapenNetwork) {
  EXPECT_ANY_THROW(EvalService(base_, goals_, bank_, oracle_understand, rl::QNetwork::random(3, 2, 2, 1), config()));
}

// The rule agent's sample dialogue, replayed through the service.
TEST_F(ServiceTest, RuleAgentSampleDialogue) {
  auto svc = make();
  const auto s = svc->create_session(AgentKind::kRule, test::left_goal());
  const std::vector<DialogueAct> expect = {
      test::agent(Intent::kRequest, {}, {Slot::kMovieName}),
      test::agent(Intent::kRequest, {}, {Slot::kStartTime}),
      test::agent(Intent::kRequest, {}, {Slot::kCity}),
      test::agent(Intent::kRequest, {}, {Slot::kDate}),
      test::agent(Intent::kRequest, {}, {Slot::kTheater}),
      test::agent(Intent::kRequest, {}, {Slot::kNumberOfPeople}),
      test::agent(Intent::kInform, {{Slot::kTaskComplete, "1"},
                                    {Slot::kMovieName, "zoolander 2"},
                                    {Slot::kDate, "tomorrow"},
                                    {Slot::kTheater, "regal meridian 16"},
                                    {Slot::kCity, "seattle"},
                                    {Slot::kStartTime, "9:25 pm"},
                                    {Slot::kNumberOfPeople, "2"}}),
      test::agent(Intent::kThanks),
  };
  const auto script = left_script();
  for (std::size_t i = 0; i < script.size(); ++i) {
    const auto reply = svc->post_message(s.id, script[i]);
    EXPECT_EQ(reply.agent_act, expect[i]) << i << ": " << render_act(reply.agent_act);
    EXPECT_FALSE(reply.agent_text.empty());
    EXPECT_EQ(reply.status, i + 1 == script.size() ? Status::kEnded : Status::kActive);
  }
  const auto done = svc->get(s.id);
  EXPECT_TRUE(done.success);
  EXPECT_EQ(done.transcript.size(), 16u);
  EXPECT_THROW(svc->post_message(s.id, "thanks()"), SessionEnded);
  const auto rated = svc->submit_rating(s.id, 4);
  EXPECT_EQ(rated.agent, AgentKind::kRule);
  EXPECT_TRUE(rated.success);
}

TEST_F(ServiceTest, JudgeTranscript) {
  const auto goal = test::right_goal();
  std::vector<SessionEvent> t = {
      {Speaker::kAgent, "", test::agent(Intent::kInform, {{Slot::kTheater, "regal la live stadium 14"}})},
      {Speaker::kAgent, "", test::agent(Intent::kInform, {{Slot::kTaskComplete, "4"}, {Slot::kNumberOfPeople, "3"}})},
  };
  EXPECT_FALSE(judge_transcript(goal, t, base_));  // start time never given
  t.insert(t.begin(), {Speaker::kAgent, "", test::agent(Intent::kInform, {{Slot::kStartTime, "11:45am"}})});
  EXPECT_TRUE(judge_transcript(goal, t, base_));
  t.back().act.inform_slots[Slot::kTaskComplete] = "failed";
  EXPECT_FALSE(judge_transcript(goal, t, base_));
}

TEST_F(ServiceTest, ErrorsAndSummary) {
  auto svc = make();
  EXPECT_THROW(svc->post_message("abc", "thanks()"), UnknownSession);
  EXPECT_THROW(svc->get("abc"), UnknownSession);
  const auto rule = svc->create_session(AgentKind::kRule, test::left_goal());
  EXPECT_THROW(svc->submit_rating(rule.id, 3), NotEnded);
  for (const auto& line : left_script()) svc->post_message(rule.id, line);
  EXPECT_THROW(svc->submit_rating(rule.id, 0), OutOfRange);
  EXPECT_THROW(svc->submit_rating(rule.id, 6), OutOfRange);
  svc->submit_rating(rule.id, 5);
  EXPECT_THROW(svc->submit_rating(rule.id, 5), AlreadyRated);

  // An RL session that exhausts the turn budget ends as a failure.
  const auto rl = svc->create_session(AgentKind::kRl, test::right_goal());
  EXPECT_FALSE(to_json(svc->get(rl.id)).contains("agent"));
  Status st = Status::kActive;
  int messages = 0;
  while (st == Status::kActive) {
    st = svc->post_message(rl.id, "greeting()").status;
    ASSERT_LE(++messages, 20);
  }
  EXPECT_FALSE(svc->get(rl.id).success);
  svc->submit_rating(rl.id, 2);
  EXPECT_EQ(to_json(svc->get(rl.id)).at("agent"), "rl");

  const auto sum = svc->summary();
  EXPECT_EQ(sum.rule.sessions, 1u);
  EXPECT_DOUBLE_EQ(sum.rule.success_rate, 1.0);
  EXPECT_DOUBLE_EQ(sum.rule.mean_rating, 5.0);
  EXPECT_EQ(sum.rule.histogram[4], 1u);
  EXPECT_EQ(sum.rl.sessions, 1u);
  EXPECT_DOUBLE_EQ(sum.rl.success_rate, 0.0);
  EXPECT_EQ(sum.rl.histogram[1], 1u);
}

TEST_F(ServiceTest, RecoversFromCrashWithTornTail) {
  std::vector<nlohmann::json> before;
  std::vector<std::string> ids;
  {
    auto svc = make();
    const auto a = svc->create_session(AgentKind::kRule, test::left_goal());
    for (const auto& line : left_script()) svc->post_message(a.id, line);
    svc->submit_rating(a.id, 4);
    const auto b = svc->create_session();
    svc->post_message(b.id, "request(ticket;moviename=deadpool)");
    ids = {a.id, b.id};
    for (const auto& id : ids) before.push_back(to_json(svc->get(id)));
  }
  {
    std::ofstream out(dir_ / "sessions.jsonl", std::ios::app);
    out << R"({"type":"user","id":")" << ids[1] << R"(","text":"thanks)";
  }
  auto svc = make();
  ASSERT_EQ(svc->session_count(), 2u);
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(to_json(svc->get(ids[i])), before[i]);
  EXPECT_EQ(svc->summary().rule.sessions, 1u);
  // The recovered session keeps going and new ids do not collide.
  EXPECT_NO_THROW(svc->post_message(ids[1], "inform(date=tomorrow)"));
  const auto c = svc->create_session();
  EXPECT_NE(c.id, ids[0]);
  EXPECT_NE(c.id, ids[1]);
}

TEST_F(ServiceTest, CorruptionMidFileIsAnError) {
  {
    auto svc = make();
    svc->create_session();
  }
  {
    std::ofstream out(dir_ / "sessions.jsonl", std::ios::app);
    out << "not json\n";
  }
  {
    std::ofstream out(dir_ / "sessions.jsonl", std::ios::app);
    out << R"({"type":"create"})" << "\n";
  }
  EXPECT_THROW(make(), StoreError);
}

TEST_F(ServiceTest, HttpApi) {
  auto svc = make();
  httplib::Server server;
  register_routes(server, *svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/api/sessions", "", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto session = nlohmann::json::parse(created->body);
  const std::string id = session.at("id");
  EXPECT_EQ(session.at("status"), "active");
  EXPECT_FALSE(session.contains("agent"));

  auto msg = client.Post("/api/sessions/" + id + "/messages", R"J({"text":"request(ticket;moviename=deadpool)"})J",
                         "application/json");
  ASSERT_TRUE(msg);
  EXPECT_EQ(msg->status, 200);
  const auto reply = nlohmann::json::parse(msg->body);
  EXPECT_TRUE(reply.contains("agent_text"));
  EXPECT_TRUE(reply.contains("agent_act"));

  auto bad = client.Post("/api/sessions/" + id + "/messages", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto early = client.Post("/api/sessions/" + id + "/rating", R"({"rating":3})", "application/json");
  ASSERT_TRUE(early);
  EXPECT_EQ(early->status, 409);
  EXPECT_EQ(nlohmann::json::parse(early->body).at("error"), "not_ended");

  auto missing = client.Get("/api/sessions/deadbeef");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  auto got = client.Get("/api/sessions/" + id);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  EXPECT_EQ(nlohmann::json::parse(got->body).at("transcript").size(), 2u);

  const auto rule = svc->create_session(AgentKind::kRule, test::left_goal());
  for (const auto& line : left_script()) svc->post_message(rule.id, line);
  auto range = client.Post("/api/sessions/" + rule.id + "/rating", R"({"rating":9})", "application/json");
  ASSERT_TRUE(range);
  EXPECT_EQ(range->status, 400);
  auto rated = client.Post("/api/sessions/" + rule.id + "/rating", R"({"rating":5})", "application/json");
  ASSERT_TRUE(rated);
  EXPECT_EQ(rated->status, 200);
  EXPECT_EQ(nlohmann::json::parse(rated->body).at("agent"), "rule");
  auto again = client.Post("/api/sessions/" + rule.id + "/rating", R"({"rating":5})", "application/json");
  ASSERT_TRUE(again);
  EXPECT_EQ(again->status, 409);

  auto summary = client.Get("/api/summary");
  ASSERT_TRUE(summary);
  EXPECT_EQ(nlohmann::json::parse(summary->body).at("rule").at("sessions"), 1);

  server.stop();
  thread.join();
}

TEST_F(ServiceTest, HttpNotReady) {
  auto svc = make(true, false);
  httplib::Server server;
  register_routes(server, *svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/api/sessions", "", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 503);
  server.stop();
  thread.join();
}
