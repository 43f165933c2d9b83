#include "dlg/rl/dqn.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dlg::rl {

namespace {

constexpr int kCheckpointVersion = 1;

void check_width(std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeMismatch("state width " + std::to_string(got) + " does not match network input " + std::to_string(want));
  }
}

double norm(const std::vector<double>& g) {
  double s = 0.0;
  for (double v : g) s += v * v;
  return std::sqrt(s);
}

void sgd_step(QNetwork& net, const std::vector<double>& grad, double lr, double clip) {
  double scale = lr;
  if (clip > 0) {
    const double n = norm(grad);
    if (n > clip) scale *= clip / n;
  }
  auto& p = net.mutable_params();
  for (std::size_t k = 0; k < p.size(); ++k) p[k] -= scale * grad[k];
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Rollout run_episode(const env::Environment& env, const Policy& policy, const UserGoal& goal, std::uint64_t seed,
                    double epsilon, bool keep_transitions) {
  env::Episode ep(env, goal, seed);
  Rng explore(Rng::derive(seed, 1));
  const auto& enc = env.encoder();
  const std::size_t A = env.actions().size();
  Rollout out;
  std::vector<double> s = enc.encode(ep.state());
  while (!ep.done()) {
    std::size_t a;
    if (epsilon > 0 && explore.bernoulli(epsilon)) a = explore.uniform_index(A);
    else a = policy(ep.state(), s);
    const auto res = ep.step(a);
    std::vector<double> s2 = res.done ? std::vector<double>(enc.width(), 0.0) : enc.encode(ep.state());
    if (keep_transitions) out.transitions.push_back({s, a, res.reward, s2, res.done, 0});
    s = std::move(s2);
  }
  out.outcome = ep.outcome();
  out.turns = ep.turns();
  out.reward = ep.total_reward();
  return out;
}

EvalResult summarize(const std::vector<Rollout>& rollouts) {
  EvalResult r;
  r.episodes = rollouts.size();
  if (rollouts.empty()) return r;
  double succ = 0, turns = 0, reward = 0;
  for (const auto& ro : rollouts) {
    succ += ro.outcome == env::Outcome::kSuccess ? 1.0 : 0.0;
    turns += ro.turns;
    reward += ro.reward;
  }
  const double n = static_cast<double>(rollouts.size());
  r.success_rate = succ / n;
  r.avg_turns = turns / n;
  r.avg_reward = reward / n;
  return r;
}

std::vector<Rollout> run_many(const env::Environment& env, const Policy& policy, std::size_t n, std::uint64_t seed,
                              double epsilon, bool keep, bool parallel) {
  std::vector<Rollout> out(n);
  const auto count = static_cast<std::int64_t>(n);
  auto one = [&](std::int64_t i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = run_episode(env, policy, env::episode_goal(env, seed, k), Rng::derive(seed, k), epsilon, keep);
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < count; ++i) one(i);
  } else {
    for (std::int64_t i = 0; i < count; ++i) one(i);
  }
  return out;
}

}  // namespace

QNetwork::QNetwork(std::size_t inputs, std::size_t hidden, std::size_t outputs)
    : in_(inputs), hid_(hidden), out_(outputs), params_(inputs * hidden + hidden + outputs * hidden + outputs, 0.0) {}

QNetwork QNetwork::random(std::size_t inputs, std::size_t hidden, std::size_t outputs, std::uint64_t seed) {
  QNetwork net(inputs, hidden, outputs);
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + outputs));
  auto& p = net.params_;
  for (std::size_t k = net.w1(); k < net.b1(); ++k) p[k] = (2.0 * rng.uniform01() - 1.0) * a1;
  for (std::size_t k = net.w2(); k < net.b2(); ++k) p[k] = (2.0 * rng.uniform01() - 1.0) * a2;
  return net;
}

void QNetwork::forward(std::span<const double> s, std::vector<double>& z1, std::vector<double>& q) const {
  check_width(s.size(), in_);
  const double* P = params_.data();
  z1.assign(P + b1(), P + b1() + hid_);
  for (std::size_t i = 0; i < in_; ++i) {
    const double x = s[i];
    if (x == 0.0) continue;
    const double* row = P + i * hid_;
    for (std::size_t j = 0; j < hid_; ++j) z1[j] += x * row[j];
  }
  q.assign(P + b2(), P + b2() + out_);
  for (std::size_t a = 0; a < out_; ++a) {
    const double* w = P + w2() + a * hid_;
    double v = 0.0;
    for (std::size_t j = 0; j < hid_; ++j) v += w[j] * std::max(0.0, z1[j]);
    q[a] += v;
  }
}

std::vector<double> QNetwork::q_values(std::span<const double> s) const {
  std::vector<double> z1, q;
  forward(s, z1, q);
  return q;
}

void QNetwork::backward(std::span<const double> s, const std::vector<double>& z1, std::span<const double> dq,
                        std::vector<double>& grad) const {
  const double* P = params_.data();
  double* g = grad.data();
  std::vector<double> dz(hid_, 0.0);
  for (std::size_t a = 0; a < out_; ++a) {
    const double d = dq[a];
    if (d == 0.0) continue;
    g[b2() + a] += d;
    const double* w = P + w2() + a * hid_;
    double* gw = g + w2() + a * hid_;
    for (std::size_t j = 0; j < hid_; ++j) {
      if (z1[j] <= 0.0) continue;
      gw[j] += d * z1[j];
      dz[j] += d * w[j];
    }
  }
  for (std::size_t j = 0; j < hid_; ++j) g[b1() + j] += dz[j];
  for (std::size_t i = 0; i < in_; ++i) {
    const double x = s[i];
    if (x == 0.0) continue;
    double* row = g + i * hid_;
    for (std::size_t j = 0; j < hid_; ++j) row[j] += x * dz[j];
  }
}

std::size_t argmax(std::span<const double> q) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

std::size_t select_action(const QNetwork& net, std::span<const double> s, double epsilon, Rng& rng) {
  if (epsilon > 0 && rng.bernoulli(epsilon)) return rng.uniform_index(net.outputs());
  return argmax(net.q_values(s));
}

void ReplayBuffer::push(Transition t) {
  if (capacity_ == 0) return;
  t.generation = flushes_;
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

void ReplayBuffer::flush() {
  items_.clear();
  ++flushes_;
}

double td_loss(const QNetwork& net, const QNetwork& target, std::span<const Transition* const> batch, double gamma,
               std::vector<double>* grad) {
  if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
  const double B = static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> z1, q, tz, tq, dq(net.outputs());
  for (const Transition* t : batch) {
    double y = t->r;
    if (!t->done) {
      target.forward(t->s2, tz, tq);
      y += gamma * *std::max_element(tq.begin(), tq.end());
    }
    net.forward(t->s, z1, q);
    const double err = q[t->a] - y;
    loss += err * err / B;
    if (grad) {
      std::fill(dq.begin(), dq.end(), 0.0);
      dq[t->a] = 2.0 * err / B;
      net.backward(t->s, z1, dq, *grad);
    }
  }
  return loss;
}

double td_update(QNetwork& net, const QNetwork& target, std::span<const Transition* const> batch, double gamma,
                 double lr, double clip) {
  std::vector<double> grad(net.params().size(), 0.0);
  const double loss = td_loss(net, target, batch, gamma, &grad);
  if (!std::isfinite(loss)) {
    throw NonFiniteLoss("TD loss is not finite (batch of " + std::to_string(batch.size()) +
                        ", gradient norm " + std::to_string(norm(grad)) + ")");
  }
  sgd_step(net, grad, lr, clip);
  return loss;
}

void TrainConfig::validate() const {
  if (dialogues_per_epoch < 1) throw std::invalid_argument("dialogues_per_epoch must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (!(epsilon >= 0 && epsilon <= 1)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (hidden < 1 || eval_dialogues < 1) throw std::invalid_argument("hidden and eval_dialogues must be positive");
  if (max_epochs < 0) throw std::invalid_argument("max_epochs must be non-negative");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"dialogues_per_epoch", c.dialogues_per_epoch},
                   {"batch_size", c.batch_size},
                   {"gamma", c.gamma},
                   {"epsilon", c.epsilon},
                   {"learning_rate", c.learning_rate},
                   {"clip", c.clip},
                   {"hidden", c.hidden},
                   {"buffer_capacity", c.buffer_capacity},
                   {"eval_dialogues", c.eval_dialogues},
                   {"max_epochs", c.max_epochs},
                   {"seed", c.seed},
                   {"warm_dialogues", c.warm_dialogues},
                   {"warm_max_epochs", c.warm_max_epochs},
                   {"warm_learning_rate", c.warm_learning_rate},
                   {"warm_margin", c.warm_margin},
                   {"warm_target_accuracy", c.warm_target_accuracy}};
  j["tau"] = std::isnan(c.tau) ? nlohmann::json(nullptr) : nlohmann::json(c.tau);
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.dialogues_per_epoch = j.value("dialogues_per_epoch", c.dialogues_per_epoch);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.gamma = j.value("gamma", c.gamma);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip = j.value("clip", c.clip);
  c.hidden = j.value("hidden", c.hidden);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.eval_dialogues = j.value("eval_dialogues", c.eval_dialogues);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seed = j.value("seed", c.seed);
  c.warm_dialogues = j.value("warm_dialogues", c.warm_dialogues);
  c.warm_max_epochs = j.value("warm_max_epochs", c.warm_max_epochs);
  c.warm_learning_rate = j.value("warm_learning_rate", c.warm_learning_rate);
  c.warm_margin = j.value("warm_margin", c.warm_margin);
  c.warm_target_accuracy = j.value("warm_target_accuracy", c.warm_target_accuracy);
  if (j.contains("tau") && !j["tau"].is_null()) c.tau = j["tau"].get<double>();
  c.validate();
  return c;
}

Policy greedy_policy(const QNetwork& net) {
  return [&net](const dm::DialogueState&, std::span<const double> s) { return argmax(net.q_values(s)); };
}

Policy rule_agent() {
  return [](const dm::DialogueState& state, std::span<const double>) {
    return dm::rule_policy(state, dm::ActionSet::movie());
  };
}

Rollout rollout(const env::Environment& env, const Policy& policy, const UserGoal& goal, std::uint64_t seed,
                double epsilon, const QNetwork*) {
  return run_episode(env, policy, goal, seed, epsilon, true);
}

std::vector<Rollout> collect(const env::Environment& env, const Policy& policy, std::size_t n, std::uint64_t seed,
                             double epsilon) {
  return run_many(env, policy, n, seed, epsilon, true, true);
}

std::vector<Rollout> collect_serial(const env::Environment& env, const Policy& policy, std::size_t n,
                                    std::uint64_t seed, double epsilon) {
  return run_many(env, policy, n, seed, epsilon, true, false);
}

EvalResult evaluate(const env::Environment& env, const Policy& policy, std::size_t M, std::uint64_t seed) {
  if (M < 1) throw std::invalid_argument("evaluate: M must be at least 1");
  return summarize(run_many(env, policy, M, seed, 0.0, false, true));
}

EvalResult evaluate_serial(const env::Environment& env, const Policy& policy, std::size_t M, std::uint64_t seed) {
  if (M < 1) throw std::invalid_argument("evaluate: M must be at least 1");
  return summarize(run_many(env, policy, M, seed, 0.0, false, false));
}

EvalResult evaluate_policy(const QNetwork& net, const env::Environment& env, std::size_t M, std::uint64_t seed) {
  return evaluate(env, greedy_policy(net), M, seed);
}

double eval_upper_bound(const env::Environment& env, std::size_t M, std::uint64_t seed) {
  if (M < 1) return 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < M; ++i) n += env.kb().goal_reachable(env::episode_goal(env, seed, i)) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(M);
}

std::uint64_t eval_seed(const TrainConfig& config) { return Rng::derive(config.seed, 101); }

WarmStartResult warm_start(const env::Environment& env, const TrainConfig& config) {
  config.validate();
  WarmStartResult out{ReplayBuffer(config.buffer_capacity), {}, 0.0, 0, 0, 0};
  out.net = QNetwork::random(env.encoder().width(), config.hidden, env.actions().size(), Rng::derive(config.seed, 11));

  // Rule episodes with their discounted returns.
  const auto rollouts = collect(env, rule_agent(), config.warm_dialogues, Rng::derive(config.seed, 12), 0.0);
  std::vector<Transition> data;
  std::vector<double> returns;
  for (const auto& ro : rollouts) {
    std::vector<double> g(ro.transitions.size());
    double G = 0.0;
    for (std::size_t k = ro.transitions.size(); k-- > 0;) {
      const auto& t = ro.transitions[k];
      G = t.done ? t.r : t.r + config.gamma * G;
      g[k] = G;
    }
    for (std::size_t k = 0; k < ro.transitions.size(); ++k) {
      data.push_back(ro.transitions[k]);
      returns.push_back(g[k]);
      out.buffer.push(ro.transitions[k]);
    }
  }
  out.episodes = rollouts.size();
  out.transitions = data.size();
  if (data.empty()) throw WarmStartFailed("rule agent produced no transitions");

  auto accuracy = [&] {
    std::size_t hit = 0;
    for (const auto& t : data) hit += argmax(out.net.q_values(t.s)) == t.a ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(data.size());
  };

  Rng rng(Rng::derive(config.seed, 13));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(out.net.params().size()), z1, q, dq(env.actions().size());
  out.imitation_accuracy = accuracy();
  while (out.epochs < config.warm_max_epochs && out.imitation_accuracy < config.warm_target_accuracy) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double B = static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& t = data[order[k]];
        const double G = returns[order[k]];
        out.net.forward(t.s, z1, q);
        for (std::size_t a = 0; a < q.size(); ++a) {
          const double y = a == t.a ? G : G - config.warm_margin;
          const bool active = a == t.a || q[a] > y;
          dq[a] = active ? 2.0 * (q[a] - y) / B : 0.0;
        }
        out.net.backward(t.s, z1, dq, grad);
      }
      sgd_step(out.net, grad, config.warm_learning_rate, config.clip);
    }
    ++out.epochs;
    out.imitation_accuracy = accuracy();
  }
  if (out.imitation_accuracy < 0.5) {
    throw WarmStartFailed("imitation accuracy " + std::to_string(out.imitation_accuracy) + " after " +
                          std::to_string(out.epochs) + " epochs");
  }
  return out;
}

TrainingResult run_training(const env::Environment& env, const TrainConfig& config, const EpochHook& hook) {
  config.validate();
  TrainingResult res;
  const std::uint64_t eval_seed = rl::eval_seed(config);
  res.upper_bound = eval_upper_bound(env, config.eval_dialogues, eval_seed);
  res.rule_success = evaluate(env, rule_agent(), config.eval_dialogues, eval_seed).success_rate;
  res.tau = std::isnan(config.tau) ? res.rule_success : config.tau;

  res.warm = warm_start(env, config);
  ReplayBuffer buffer = res.warm.buffer;
  QNetwork net = res.warm.net;
  QNetwork target = net;
  res.warm_eval = evaluate_policy(net, env, config.eval_dialogues, eval_seed);
  double target_eval = res.warm_eval.success_rate;
  bool past_threshold = false;

  Rng rng(Rng::derive(config.seed, 103));
  std::vector<const Transition*> batch;
  std::vector<std::size_t> order;
  auto add = [&](const std::vector<Rollout>& rollouts) {
    for (const auto& ro : rollouts) {
      for (const auto& t : ro.transitions) buffer.push(t);
    }
  };

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto ep_seed = Rng::derive(config.seed, 1000000ULL + static_cast<std::uint64_t>(epoch));
    add(collect(env, greedy_policy(net), config.dialogues_per_epoch, Rng::derive(ep_seed, 1), config.epsilon));

    order.resize(buffer.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(&buffer[order[k]]);
      loss_sum += td_update(net, target, batch, config.gamma, config.learning_rate, config.clip);
      ++steps;
    }

    const EvalResult ev = evaluate_policy(net, env, config.eval_dialogues, eval_seed);
    bool flushed = false;
    if (!past_threshold && ev.success_rate >= res.tau) {
      past_threshold = true;
      res.first_flush_epoch = epoch;
      flushed = true;
    } else if (past_threshold && ev.success_rate > target_eval) {
      flushed = true;
    }
    if (flushed) {
      buffer.flush();
      ++res.flushes;
      add(collect(env, greedy_policy(net), config.dialogues_per_epoch, Rng::derive(ep_seed, 2), config.epsilon));
    }
    target = net;
    target_eval = ev.success_rate;

    CurveRow row{epoch, ev.success_rate, ev.avg_turns, ev.avg_reward, buffer.size(), flushed,
                 steps ? loss_sum / static_cast<double>(steps) : 0.0};
    res.curve.push_back(row);
    if (hook) hook(row, net, target);
  }
  res.net = std::move(net);
  return res;
}

double final_success(const std::vector<CurveRow>& curve, double fraction) {
  if (curve.empty()) return 0.0;
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(curve.size()))));
  std::vector<double> v;
  for (std::size_t i = curve.size() - k; i < curve.size(); ++i) v.push_back(curve[i].success_rate);
  return mean(v);
}

double final_turns(const std::vector<CurveRow>& curve, double fraction) {
  if (curve.empty()) return 0.0;
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(curve.size()))));
  std::vector<double> v;
  for (std::size_t i = curve.size() - k; i < curve.size(); ++i) v.push_back(curve[i].avg_turns);
  return mean(v);
}

void write_curve_csv(const std::vector<CurveRow>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,success_rate,avg_turns,avg_reward,buffer_size,flushed,loss\n";
  out.precision(17);
  for (const auto& r : curve) {
    out << r.epoch << ',' << r.success_rate << ',' << r.avg_turns << ',' << r.avg_reward << ',' << r.buffer_size
        << ',' << (r.flushed ? 1 : 0) << ',' << r.loss << '\n';
  }
}

std::vector<CurveRow> read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<CurveRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    CurveRow r;
    char c;
    int flushed = 0;
    ss >> r.epoch >> c >> r.success_rate >> c >> r.avg_turns >> c >> r.avg_reward >> c >> r.buffer_size >> c >> flushed >> c >> r.loss;
    if (!ss) throw std::runtime_error("malformed curve row in " + path.string());
    r.flushed = flushed != 0;
    rows.push_back(r);
  }
  return rows;
}

void save_checkpoint(const QNetwork& net, const dm::StateEncoder& encoder, const TrainConfig& config,
                     const std::filesystem::path& path) {
  if (net.inputs() != encoder.width()) throw ShapeMismatch("network input does not match encoder width");
  nlohmann::json j{{"format", "dlg-dqn"},         {"version", kCheckpointVersion},
                   {"layout", encoder.layout_json()}, {"config", to_json(config)},
                   {"inputs", net.inputs()},      {"hidden", net.hidden()},
                   {"outputs", net.outputs()},    {"params", net.params()}};
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << j.dump() << '\n';
}

QNetwork load_checkpoint(const std::filesystem::path& path, const dm::StateEncoder& encoder) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "dlg-dqn") throw CheckpointError("not a DQN checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");
    const auto& layout = j.at("layout");
    if (layout.at("hash").get<std::uint64_t>() != encoder.layout_hash() ||
        layout.at("width").get<std::size_t>() != encoder.width()) {
      throw CheckpointError("checkpoint was trained with a different state layout");
    }
    QNetwork net(j.at("inputs").get<std::size_t>(), j.at("hidden").get<std::size_t>(),
                 j.at("outputs").get<std::size_t>());
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != net.params().size()) throw CheckpointError("parameter count mismatch");
    net.mutable_params() = std::move(params);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace dlg::rl
