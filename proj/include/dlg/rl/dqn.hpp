#pragma once

#include <cmath>
#include <deque>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dlg/env/environment.hpp"

namespace dlg::rl {

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WarmStartFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One hidden ReLU layer. Parameters in one flat vector:
// W1[i * H + j] (input-major), b1[H], W2[a * H + j], b2[A].
class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(std::size_t inputs, std::size_t hidden, std::size_t outputs);
  // Uniform Glorot-style initialization from `seed`.
  static QNetwork random(std::size_t inputs, std::size_t hidden, std::size_t outputs, std::uint64_t seed);

  std::size_t inputs() const { return in_; }
  std::size_t hidden() const { return hid_; }
  std::size_t outputs() const { return out_; }

  std::vector<double> q_values(std::span<const double> s) const;  // ShapeMismatch
  // Also returns the hidden pre-activations for backprop.
  void forward(std::span<const double> s, std::vector<double>& z1, std::vector<double>& q) const;

  // Accumulates d(sum_a dq[a] * Q(s, a)) / d params into grad.
  void backward(std::span<const double> s, const std::vector<double>& z1, std::span<const double> dq,
                std::vector<double>& grad) const;

  const std::vector<double>& params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return in_ * hid_; }
  std::size_t w2() const { return b1() + hid_; }
  std::size_t b2() const { return w2() + out_ * hid_; }

  bool operator==(const QNetwork&) const = default;

 private:
  std::size_t in_ = 0, hid_ = 0, out_ = 0;
  std::vector<double> params_;
};

std::size_t argmax(std::span<const double> q);  // lowest index on ties
std::size_t select_action(const QNetwork& net, std::span<const double> s, double epsilon, Rng& rng);

struct Transition {
  std::vector<double> s;
  std::size_t a = 0;
  double r = 0.0;
  std::vector<double> s2;
  bool done = false;
  std::uint32_t generation = 0;  // buffer flush count when stored
};

// FIFO store. flush() empties it and bumps the generation.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000) : capacity_(capacity) {}

  void push(Transition t);
  void flush();
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool flushed() const { return flushes_ > 0; }
  std::uint32_t generation() const { return flushes_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  const std::deque<Transition>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::uint32_t flushes_ = 0;
  std::deque<Transition> items_;
};

// Mean squared TD error against r + gamma * max_a' Q_target(s2, a')
// (r alone when done); adds its gradient into grad when non-null.
double td_loss(const QNetwork& net, const QNetwork& target, std::span<const Transition* const> batch, double gamma,
               std::vector<double>* grad);

// One SGD step; returns the pre-step loss. clip > 0 bounds the gradient
// norm. NonFiniteLoss when the loss is not finite.
double td_update(QNetwork& net, const QNetwork& target, std::span<const Transition* const> batch, double gamma,
                 double lr, double clip = 0.0);

struct TrainConfig {
  std::size_t dialogues_per_epoch = 100;  // N
  std::size_t batch_size = 16;
  double gamma = 0.9;
  double epsilon = 0.05;
  double learning_rate = 0.003;
  double clip = 100.0;
  std::size_t hidden = 80;
  std::size_t buffer_capacity = 5000;
  std::size_t eval_dialogues = 200;  // M
  double tau = std::numeric_limits<double>::quiet_NaN();  // NaN: measure the rule agent
  int max_epochs = 300;
  std::uint64_t seed = 7;
  // Warm start.
  std::size_t warm_dialogues = 100;
  int warm_max_epochs = 60;
  double warm_learning_rate = 0.01;
  double warm_margin = 10.0;
  double warm_target_accuracy = 0.9;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EvalResult {
  double success_rate = 0.0;
  double avg_turns = 0.0;
  double avg_reward = 0.0;
  std::size_t episodes = 0;
  bool operator==(const EvalResult&) const = default;
};

// Maps the tracker state (and its encoding) to an action index.
using Policy = std::function<std::size_t(const dm::DialogueState&, std::span<const double>)>;

Policy greedy_policy(const QNetwork& net);
Policy rule_agent();

// Greedy rollouts of episodes i < M with goal episode_goal(env, seed, i)
// and episode seed Rng::derive(seed, i). The OpenMP version returns exactly
// the serial result.
EvalResult evaluate(const env::Environment& env, const Policy& policy, std::size_t M, std::uint64_t seed);
EvalResult evaluate_serial(const env::Environment& env, const Policy& policy, std::size_t M, std::uint64_t seed);
EvalResult evaluate_policy(const QNetwork& net, const env::Environment& env, std::size_t M, std::uint64_t seed);

// Reachable share of the goals evaluate() draws for (M, seed); no policy
// can succeed more often.
double eval_upper_bound(const env::Environment& env, std::size_t M, std::uint64_t seed);

// Seed run_training uses for all its evaluations.
std::uint64_t eval_seed(const TrainConfig& config);

struct Rollout {
  std::vector<Transition> transitions;
  env::Outcome outcome = env::Outcome::kOngoing;
  int turns = 0;
  double reward = 0.0;
};

// Runs one episode; `epsilon` > 0 mixes in uniform random actions.
Rollout rollout(const env::Environment& env, const Policy& policy, const UserGoal& goal, std::uint64_t seed,
                double epsilon = 0.0, const QNetwork* net_for_epsilon = nullptr);

// Episodes i < n with seeds derived from `seed`, in parallel, concatenated
// in index order.
std::vector<Rollout> collect(const env::Environment& env, const Policy& policy, std::size_t n, std::uint64_t seed,
                             double epsilon);
std::vector<Rollout> collect_serial(const env::Environment& env, const Policy& policy, std::size_t n,
                                    std::uint64_t seed, double epsilon);

struct WarmStartResult {
  ReplayBuffer buffer;
  QNetwork net;
  double imitation_accuracy = 0.0;
  int epochs = 0;
  std::size_t episodes = 0;
  std::size_t transitions = 0;
};

WarmStartResult warm_start(const env::Environment& env, const TrainConfig& config);

struct CurveRow {
  int epoch = 0;
  double success_rate = 0.0;
  double avg_turns = 0.0;
  double avg_reward = 0.0;
  std::size_t buffer_size = 0;
  bool flushed = false;
  double loss = 0.0;
  bool operator==(const CurveRow&) const = default;
};

struct TrainingResult {
  QNetwork net;
  std::vector<CurveRow> curve;
  double tau = 0.0;
  double rule_success = 0.0;
  EvalResult warm_eval;
  WarmStartResult warm;
  double upper_bound = 0.0;  // reachable share of the evaluation goals
  int first_flush_epoch = -1;
  std::size_t flushes = 0;
};

// Observer for each finished epoch: (row, net, target). Lets tests watch
// the target network.
using EpochHook = std::function<void(const CurveRow&, const QNetwork&, const QNetwork&)>;

TrainingResult run_training(const env::Environment& env, const TrainConfig& config, const EpochHook& hook = {});

// Mean success over the last `fraction` of the curve (at least one row).
double final_success(const std::vector<CurveRow>& curve, double fraction = 0.1);
double final_turns(const std::vector<CurveRow>& curve, double fraction = 0.1);

void write_curve_csv(const std::vector<CurveRow>& curve, const std::filesystem::path& path);
std::vector<CurveRow> read_curve_csv(const std::filesystem::path& path);

// Parameters plus encoder layout and config. load() rejects a file whose
// layout hash differs from `encoder`.
void save_checkpoint(const QNetwork& net, const dm::StateEncoder& encoder, const TrainConfig& config,
                     const std::filesystem::path& path);
QNetwork load_checkpoint(const std::filesystem::path& path, const dm::StateEncoder& encoder);

}  // namespace dlg::rl
