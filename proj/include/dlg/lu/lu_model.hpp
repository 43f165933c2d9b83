#pragma once

#include <filesystem>
#include <tuple>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dlg/core/dialogue_act.hpp"
#include "dlg/kb/corpus.hpp"

namespace dlg::lu {

using LabeledExample = kb::LabeledUtterance;

class DegenerateData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws DegenerateData naming the first malformed example (length
// mismatch, empty tokens, invalid IOB, unknown intent label).
void validate_examples(std::span<const LabeledExample> examples);

struct LuConfig {
  std::size_t embed_dim = 24;
  std::size_t hidden_dim = 48;
  int epochs = 15;
  double learning_rate = 0.05;
  double lr_decay = 0.1;  // lr_e = learning_rate / (1 + lr_decay * e)
  double clip = 5.0;      // per-example gradient norm bound, 0 disables
  std::uint64_t seed = 11;
};

nlohmann::json to_json(const LuConfig& c);
LuConfig lu_config_from_json(const nlohmann::json& j);

struct Prediction {
  std::vector<std::string> tags;
  std::string intent;
};

// Elman network over a two-token context window. Tags are read from the
// hidden state at each token and the intent from the state at the end
// marker. Parameters live in one flat vector.
class LuModel {
 public:
  LuModel() = default;
  LuModel(std::vector<std::string> tokens, std::vector<std::string> tags, std::vector<std::string> intents,
          const LuConfig& config);

  // Vocabularies from the data, parameters drawn from config.seed.
  static LuModel build(std::span<const LabeledExample> examples, const LuConfig& config);

  // Negative log-likelihood of tags and intent; adds d loss / d params into
  // `grad` when non-null (grad must be params().size()).
  double example_loss(const LabeledExample& ex, std::vector<double>* grad) const;
  double objective(std::span<const LabeledExample> examples) const;  // mean loss

  Prediction predict(const std::vector<std::string>& tokens) const;

  const std::vector<double>& params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  const LuConfig& config() const { return config_; }
  const std::vector<std::string>& tag_vocab() const { return tags_; }
  const std::vector<std::string>& intent_vocab() const { return intents_; }
  std::size_t token_count() const { return tokens_.size(); }

  nlohmann::json to_json() const;
  static LuModel from_json(const nlohmann::json& j);  // CheckpointError
  void save(const std::filesystem::path& path) const;
  static LuModel load(const std::filesystem::path& path);

  bool operator==(const LuModel& o) const {
    return tokens_ == o.tokens_ && tags_ == o.tags_ && intents_ == o.intents_ && params_ == o.params_ &&
           majority_intent_ == o.majority_intent_;
  }

  const std::string& majority_intent() const { return majority_intent_; }

 private:
  struct Offsets {
    std::size_t emb, wx, wh, b, wt, bt, wi, bi, total;
  };
  Offsets offsets() const;
  std::size_t token_index(const std::string& t) const;
  std::vector<std::size_t> input_ids(const std::vector<std::string>& tokens) const;

  std::vector<std::string> tokens_;  // 0 = <unk>, 1 = </s>
  std::vector<std::string> tags_;
  std::vector<std::string> intents_;
  std::unordered_map<std::string, std::size_t> token_ids_;
  std::string majority_intent_;
  LuConfig config_;
  std::vector<double> params_;
};

struct TrainReport {
  std::vector<double> epoch_objective;  // after each epoch, on the training set
  double initial_objective = 0.0;
};

LuModel train_lu(std::span<const LabeledExample> examples, const LuConfig& config, TrainReport* report = nullptr);

// Spans become inform values; a `request_<slot>` label adds that request
// unless the slot is informed; an `inform_<slot>` label with no spans
// yields <slot>=anything. Later spans of the same slot win and are counted
// in `collisions`.
DialogueAct frame_from_prediction(const std::vector<std::string>& tokens, const std::vector<std::string>& tags,
                                  const std::string& intent, std::size_t* collisions = nullptr);

// Sets every I- tag that does not continue a span of the same slot to O.
std::vector<std::string> repair_iob(std::vector<std::string> tags);

struct LuMetrics {
  double intent_accuracy = 0.0;
  double slot_f1 = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
};

struct Span {
  std::size_t begin, end;  // [begin, end)
  std::string slot;
  bool operator<(const Span& o) const { return std::tie(begin, end, slot) < std::tie(o.begin, o.end, o.slot); }
  bool operator==(const Span&) const = default;
};
std::vector<Span> spans_of(const std::vector<std::string>& tags);

// Exact-match intent accuracy and micro span F1.
LuMetrics score_predictions(std::span<const LabeledExample> gold, std::span<const Prediction> predicted);
LuMetrics evaluate_lu(const LuModel& model, std::span<const LabeledExample> heldout);

}  // namespace dlg::lu
