#include <gtest/gtest.h>

#include <cmath>

#include "dlg/rl/dqn.hpp"
#include "fixtures.hpp"

using namespace dlg;
using namespace dlg::rl;

namespace {

struct World {
  kb::KnowledgeBase base = test::sample_kb();
  std::vector<UserGoal> goals = {test::left_goal(), test::right_goal()};
  env::Environment env{base, goals, env::EnvConfig{}};
};

TrainConfig small_config() {
  TrainConfig c;
  c.dialogues_per_epoch = 20;
  c.eval_dialogues = 20;
  c.hidden = 16;
  c.max_epochs = 6;
  c.warm_dialogues = 20;
  c.warm_max_epochs = 20;
  return c;
}

// 2 inputs, 2 hidden, 2 outputs with hand-picked weights.
QNetwork tiny_net() {
  QNetwork net(2, 2, 2);
  auto& p = net.mutable_params();
  // W1[i * H + j]
  p[net.w1() + 0] = 1.0;   // x0 -> h0
  p[net.w1() + 1] = -1.0;  // x0 -> h1
  p[net.w1() + 2] = 0.5;   // x1 -> h0
  p[net.w1() + 3] = 2.0;   // x1 -> h1
  p[net.b1() + 0] = 0.0;
  p[net.b1() + 1] = -0.5;
  // W2[a * H + j]
  p[net.w2() + 0] = 1.0;
  p[net.w2() + 1] = 2.0;
  p[net.w2() + 2] = -1.0;
  p[net.w2() + 3] = 0.5;
  p[net.b2() + 0] = 0.1;
  p[net.b2() + 1] = 0.2;
  return net;
}

bool same_rollouts(const std::vector<Rollout>& a, const std::vector<Rollout>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].outcome != b[i].outcome || a[i].turns != b[i].turns || a[i].reward != b[i].reward) return false;
    if (a[i].transitions.size() != b[i].transitions.size()) return false;
    for (std::size_t k = 0; k < a[i].transitions.size(); ++k) {
      const auto& x = a[i].transitions[k];
      const auto& y = b[i].transitions[k];
      if (x.s != y.s || x.a != y.a || x.r != y.r || x.s2 != y.s2 || x.done != y.done) return false;
    }
  }
  return true;
}

}  // namespace

TEST(QNetwork, HandComputedForward) {
  const auto net = tiny_net();
  // x = (1, 2): h0 = relu(1 + 1) = 2, h1 = relu(-1 + 4 - 0.5) = 2.5
  const auto q = net.q_values(std::vector<double>{1.0, 2.0});
  EXPECT_DOUBLE_EQ(q[0], 2.0 + 5.0 + 0.1);
  EXPECT_DOUBLE_EQ(q[1], -2.0 + 1.25 + 0.2);
  // x = (1, 0): h1 = relu(-1.5) = 0
  const auto q2 = net.q_values(std::vector<double>{1.0, 0.0});
  EXPECT_DOUBLE_EQ(q2[0], 1.0 + 0.1);
  EXPECT_DOUBLE_EQ(q2[1], -1.0 + 0.2);
  EXPECT_THROW(net.q_values(std::vector<double>{1.0}), ShapeMismatch);
  EXPECT_EQ(argmax(q), 0u);
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1u);
}

TEST(QNetwork, HandComputedTdLoss) {
  const auto net = tiny_net();
  const auto target = tiny_net();
  Transition t{{1.0, 2.0}, 1, -1.0, {1.0, 0.0}, false};
  Transition d{{1.0, 0.0}, 0, 80.0, {0.0, 0.0}, true};
  const std::vector<const Transition*> batch = {&t, &d};
  // y_t = -1 + 0.9 * 1.1, q_t = -0.55; y_d = 80, q_d = 1.1
  const double e1 = -0.55 - (-1.0 + 0.9 * 1.1);
  const double e2 = 1.1 - 80.0;
  EXPECT_NEAR(td_loss(net, target, batch, 0.9, nullptr), (e1 * e1 + e2 * e2) / 2.0, 1e-12);
}

TEST(QNetwork, GradientMatchesFiniteDifferences) {
  auto net = QNetwork::random(5, 4, 3, 9);
  const auto target = QNetwork::random(5, 4, 3, 10);
  Rng rng(2);
  std::vector<Transition> ts;
  for (int i = 0; i < 4; ++i) {
    Transition t;
    for (int k = 0; k < 5; ++k) {
      t.s.push_back(rng.uniform01());
      t.s2.push_back(rng.uniform01());
    }
    t.a = rng.uniform_index(3);
    t.r = rng.uniform01() * 4 - 2;
    t.done = i == 3;
    ts.push_back(t);
  }
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  std::vector<double> grad(net.params().size(), 0.0);
  td_loss(net, target, batch, 0.9, &grad);
  const double h = 1e-6;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    auto& p = net.mutable_params()[i];
    const double keep = p;
    p = keep + h;
    const double up = td_loss(net, target, batch, 0.9, nullptr);
    p = keep - h;
    const double down = td_loss(net, target, batch, 0.9, nullptr);
    p = keep;
    ASSERT_NEAR(grad[i], (up - down) / (2 * h), 1e-6) << "param " << i;
  }
}

TEST(QNetwork, UpdateReducesLossAndRejectsNonFinite) {
  auto net = tiny_net();
  const auto target = tiny_net();
  Transition d{{1.0, 0.0}, 0, 5.0, {0.0, 0.0}, true};
  const std::vector<const Transition*> batch = {&d};
  const double before = td_update(net, target, batch, 0.9, 0.01);
  EXPECT_LT(td_loss(net, target, batch, 0.9, nullptr), before);
  Transition bad{{1.0, 0.0}, 0, std::nan(""), {0.0, 0.0}, true};
  const std::vector<const Transition*> bad_batch = {&bad};
  EXPECT_THROW(td_update(net, target, bad_batch, 0.9, 0.01), NonFiniteLoss);
}

TEST(ReplayBuffer, FifoAndFlush) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push(Transition{{}, static_cast<std::size_t>(i), 0.0, {}, false});
  ASSERT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf[0].a, 2u);
  EXPECT_EQ(buf[2].a, 4u);
  EXPECT_FALSE(buf.flushed());
  buf.flush();
  EXPECT_EQ(buf.size(), 0u);
  EXPECT_TRUE(buf.flushed());
  buf.push(Transition{});
  EXPECT_EQ(buf[0].generation, 1u);
}

TEST(Rollouts, ParallelEqualsSerial) {
  const World w;
  const auto net = QNetwork::random(w.env.encoder().width(), 16, w.env.actions().size(), 3);
  const auto policy = greedy_policy(net);
  EXPECT_EQ(evaluate(w.env, policy, 37, 5), evaluate_serial(w.env, policy, 37, 5));
  EXPECT_EQ(evaluate(w.env, rule_agent(), 37, 5), evaluate_serial(w.env, rule_agent(), 37, 5));
  EXPECT_TRUE(same_rollouts(collect(w.env, policy, 23, 8, 0.3), collect_serial(w.env, policy, 23, 8, 0.3)));
}

TEST(Rollouts, TransitionsChainAndRewardsSum) {
  const World w;
  const auto ro = rollout(w.env, rule_agent(), test::left_goal(), 4);
  ASSERT_FALSE(ro.transitions.empty());
  double total = 0;
  for (std::size_t i = 0; i < ro.transitions.size(); ++i) {
    total += ro.transitions[i].r;
    EXPECT_EQ(ro.transitions[i].done, i + 1 == ro.transitions.size());
    if (i + 1 < ro.transitions.size()) EXPECT_EQ(ro.transitions[i].s2, ro.transitions[i + 1].s);
  }
  EXPECT_DOUBLE_EQ(total, ro.reward);
  EXPECT_EQ(ro.outcome, env::Outcome::kSuccess);
}

TEST(Evaluation, UpperBoundRecount) {
  kb::KnowledgeBase base = test::sample_kb();
  UserGoal unreachable = test::left_goal();
  unreachable.inform_slots[Slot::kMovieName] = "titanic";
  const std::vector<UserGoal> goals = {test::left_goal(), unreachable, test::right_goal()};
  const env::Environment environment(base, goals, env::EnvConfig{});
  std::size_t hits = 0;
  for (std::size_t i = 0; i < 300; ++i) hits += env::episode_goal(environment, 12, i) != unreachable;
  EXPECT_DOUBLE_EQ(eval_upper_bound(environment, 300, 12), hits / 300.0);
  // No policy beats it; the rule agent never books the unreachable goal.
  EXPECT_LE(evaluate(environment, rule_agent(), 300, 12).success_rate, eval_upper_bound(environment, 300, 12));
}

TEST(Training, WarmStartImitatesRule) {
  const World w;
  const auto ws = warm_start(w.env, small_config());
  EXPECT_GE(ws.imitation_accuracy, 0.5);
  EXPECT_GT(ws.buffer.size(), 0u);
  EXPECT_EQ(ws.transitions, ws.buffer.size());
}

TEST(Training, ReproducibleAndTargetSyncsPerEpoch) {
  const World w;
  const auto config = small_config();
  std::vector<QNetwork> nets, targets;
  const auto a = run_training(w.env, config, [&](const CurveRow&, const QNetwork& net, const QNetwork& target) {
    nets.push_back(net);
    targets.push_back(target);
  });
  ASSERT_EQ(nets.size(), 6u);
  for (std::size_t e = 0; e < nets.size(); ++e) EXPECT_EQ(targets[e], nets[e]);
  for (std::size_t e = 1; e < nets.size(); ++e) EXPECT_NE(nets[e], nets[e - 1]);
  EXPECT_DOUBLE_EQ(a.tau, a.rule_success);
  EXPECT_DOUBLE_EQ(a.upper_bound, 1.0);

  const auto b = run_training(w.env, config);
  EXPECT_EQ(a.curve, b.curve);
  EXPECT_EQ(a.net, b.net);
  auto other = config;
  other.seed = 8;
  EXPECT_NE(run_training(w.env, other).net, a.net);
}

TEST(Training, FlushProtocol) {
  const World w;
  auto config = small_config();
  config.tau = 0.0;  // first evaluation always qualifies
  const auto res = run_training(w.env, config);
  EXPECT_EQ(res.first_flush_epoch, 1);
  EXPECT_TRUE(res.curve.front().flushed);
  for (std::size_t e = 1; e < res.curve.size(); ++e) {
    EXPECT_EQ(res.curve[e].flushed, res.curve[e].success_rate > res.curve[e - 1].success_rate) << e;
  }
  config.tau = 2.0;  // unreachable threshold: never flush
  const auto none = run_training(w.env, config);
  EXPECT_EQ(none.first_flush_epoch, -1);
  EXPECT_EQ(none.flushes, 0u);
}

TEST(Training, FinalSuccessAveragesTail) {
  std::vector<CurveRow> curve;
  for (int e = 1; e <= 20; ++e) curve.push_back({e, e / 20.0, 10.0, 0.0, 0, false, 0.0});
  EXPECT_DOUBLE_EQ(final_success(curve, 0.1), (0.95 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(final_success({}, 0.1), 0.0);
}

TEST(Checkpoint, RoundTripAndLayoutGuard) {
  const World w;
  const auto net = QNetwork::random(w.env.encoder().width(), 8, w.env.actions().size(), 1);
  const auto path = std::filesystem::temp_directory_path() / "dlg_test_dqn.json";
  save_checkpoint(net, w.env.encoder(), small_config(), path);
  EXPECT_EQ(load_checkpoint(path, w.env.encoder()), net);
  const dm::StateEncoder other(dm::ActionSet::movie(), 30);
  EXPECT_THROW(load_checkpoint(path, other), CheckpointError);
  std::filesystem::remove(path);
}

TEST(CurveCsv, RoundTrip) {
  const std::vector<CurveRow> curve = {{1, 0.25, 12.5, -3.0, 40, false, 1.5}, {2, 0.5, 10.0, 20.0, 80, true, 0.75}};
  const auto path = std::filesystem::temp_directory_path() / "dlg_test_curve.csv";
  write_curve_csv(curve, path);
  EXPECT_EQ(read_curve_csv(path), curve);
  std::filesystem::remove(path);
}

TEST(TrainConfig, Validation) {
  auto c = small_config();
  c.batch_size = 0;
  EXPECT_ANY_THROW(c.validate());
  const auto j = to_json(small_config());
  EXPECT_EQ(to_json(train_config_from_json(j)), j);
}
