#include "dlg/lu/lu_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "dlg/core/intent_label.hpp"
#include "dlg/core/rng.hpp"

namespace dlg::lu {

namespace {

constexpr const char* kUnk = "<unk>";
constexpr const char* kEnd = "</s>";
constexpr int kCheckpointVersion = 1;

bool valid_tag(const std::string& t) {
  if (t == "O") return true;
  if (t.size() < 3 || (t[0] != 'B' && t[0] != 'I') || t[1] != '-') return false;
  return find_slot(std::string_view(t).substr(2)).has_value();
}

std::size_t index_in(const std::vector<std::string>& v, const std::string& x) {
  const auto it = std::find(v.begin(), v.end(), x);
  if (it == v.end()) throw DegenerateData("label '" + x + "' missing from vocabulary");
  return static_cast<std::size_t>(it - v.begin());
}

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - m));
  for (double& v : z) v /= sum;
}

std::string clean_value(std::string v) {
  std::erase_if(v, [](char c) { return c == ';' || c == '=' || c == '(' || c == ')'; });
  return normalize_value(v);
}

}  // namespace

void validate_examples(std::span<const LabeledExample> examples) {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const std::string where = "example " + std::to_string(i) + ": ";
    if (ex.tokens.empty()) throw DegenerateData(where + "no tokens");
    if (ex.tokens.size() != ex.tags.size()) throw DegenerateData(where + "token/tag length mismatch");
    for (std::size_t t = 0; t < ex.tags.size(); ++t) {
      if (!valid_tag(ex.tags[t])) throw DegenerateData(where + "bad tag '" + ex.tags[t] + "'");
      if (ex.tags[t][0] == 'I') {
        const std::string slot = ex.tags[t].substr(2);
        if (t == 0 || ex.tags[t - 1] == "O" || ex.tags[t - 1].substr(2) != slot) {
          throw DegenerateData(where + "I- tag without a preceding span");
        }
      }
    }
    try {
      parse_intent_label(ex.intent);
    } catch (const SchemaError&) {
      throw DegenerateData(where + "unknown intent '" + ex.intent + "'");
    }
  }
}

nlohmann::json to_json(const LuConfig& c) {
  return {{"embed_dim", c.embed_dim}, {"hidden_dim", c.hidden_dim}, {"epochs", c.epochs},
          {"learning_rate", c.learning_rate}, {"lr_decay", c.lr_decay}, {"clip", c.clip}, {"seed", c.seed}};
}

LuConfig lu_config_from_json(const nlohmann::json& j) {
  LuConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.clip = j.value("clip", c.clip);
  c.seed = j.value("seed", c.seed);
  return c;
}

LuModel::LuModel(std::vector<std::string> tokens, std::vector<std::string> tags, std::vector<std::string> intents,
                 const LuConfig& config)
    : tokens_(std::move(tokens)), tags_(std::move(tags)), intents_(std::move(intents)), config_(config) {
  if (tokens_.size() < 2 || tokens_[0] != kUnk || tokens_[1] != kEnd) {
    throw std::invalid_argument("token vocabulary must start with <unk>, </s>");
  }
  if (tags_.empty() || intents_.empty()) throw DegenerateData("empty tag or intent vocabulary");
  for (std::size_t i = 0; i < tokens_.size(); ++i) token_ids_[tokens_[i]] = i;
  majority_intent_ = intents_.front();
  params_.assign(offsets().total, 0.0);
  Rng rng(config_.seed);
  const double scale = 0.1;
  for (double& p : params_) p = (2.0 * rng.uniform01() - 1.0) * scale;
  const auto o = offsets();
  std::fill(params_.begin() + o.b, params_.begin() + o.b + config_.hidden_dim, 0.0);
  std::fill(params_.begin() + o.bt, params_.begin() + o.bt + tags_.size(), 0.0);
  std::fill(params_.begin() + o.bi, params_.begin() + o.bi + intents_.size(), 0.0);
}

LuModel LuModel::build(std::span<const LabeledExample> examples, const LuConfig& config) {
  if (examples.empty()) throw DegenerateData("no training examples");
  validate_examples(examples);
  std::vector<std::string> tokens{kUnk, kEnd};
  std::set<std::string> seen_tokens, seen_tags{"O"};
  std::map<std::string, std::size_t> intent_counts;
  for (const auto& ex : examples) {
    for (const auto& t : ex.tokens) {
      if (seen_tokens.insert(t).second) tokens.push_back(t);
    }
    seen_tags.insert(ex.tags.begin(), ex.tags.end());
    ++intent_counts[ex.intent];
  }
  std::vector<std::string> intents;
  for (const auto& [label, n] : intent_counts) intents.push_back(label);
  LuModel model(std::move(tokens), {seen_tags.begin(), seen_tags.end()}, std::move(intents), config);
  std::size_t best = 0;
  for (const auto& [label, n] : intent_counts) {
    if (n > best) {
      best = n;
      model.majority_intent_ = label;
    }
  }
  return model;
}

LuModel::Offsets LuModel::offsets() const {
  const std::size_t d = config_.embed_dim, h = config_.hidden_dim;
  Offsets o{};
  o.emb = 0;
  o.wx = o.emb + tokens_.size() * d;
  o.wh = o.wx + h * 2 * d;
  o.b = o.wh + h * h;
  o.wt = o.b + h;
  o.bt = o.wt + tags_.size() * h;
  o.wi = o.bt + tags_.size();
  o.bi = o.wi + intents_.size() * h;
  o.total = o.bi + intents_.size();
  return o;
}

std::size_t LuModel::token_index(const std::string& t) const {
  const auto it = token_ids_.find(t);
  return it == token_ids_.end() ? 0 : it->second;
}

std::vector<std::size_t> LuModel::input_ids(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size() + 2);
  for (const auto& t : tokens) ids.push_back(token_index(t));
  ids.push_back(1);
  ids.push_back(1);
  return ids;
}

double LuModel::example_loss(const LabeledExample& ex, std::vector<double>* grad) const {
  const std::size_t d = config_.embed_dim, H = config_.hidden_dim;
  const std::size_t nT = tags_.size(), nI = intents_.size();
  const auto o = offsets();
  const double* P = params_.data();
  const std::vector<std::size_t> ids = input_ids(ex.tokens);
  const std::size_t n = ex.tokens.size(), steps = n + 1;

  // h[t] for t = 0..steps, h[0] = 0.
  std::vector<double> h((steps + 1) * H, 0.0);
  for (std::size_t t = 1; t <= steps; ++t) {
    const double* e0 = P + o.emb + ids[t - 1] * d;
    const double* e1 = P + o.emb + ids[t] * d;
    const double* hp = &h[(t - 1) * H];
    double* ht = &h[t * H];
    for (std::size_t j = 0; j < H; ++j) {
      const double* wx = P + o.wx + j * 2 * d;
      const double* wh = P + o.wh + j * H;
      double a = P[o.b + j];
      for (std::size_t k = 0; k < d; ++k) a += wx[k] * e0[k] + wx[d + k] * e1[k];
      for (std::size_t k = 0; k < H; ++k) a += wh[k] * hp[k];
      ht[j] = std::tanh(a);
    }
  }

  double loss = 0.0;
  std::vector<double> dh((steps + 1) * H, 0.0);
  std::vector<double> z;
  auto output = [&](std::size_t w_off, std::size_t b_off, std::size_t n_out, std::size_t gold, std::size_t t) {
    const double* ht = &h[t * H];
    z.assign(n_out, 0.0);
    for (std::size_t c = 0; c < n_out; ++c) {
      double v = P[b_off + c];
      for (std::size_t k = 0; k < H; ++k) v += P[w_off + c * H + k] * ht[k];
      z[c] = v;
    }
    softmax_inplace(z);
    loss -= std::log(std::max(z[gold], 1e-300));
    if (!grad) return;
    z[gold] -= 1.0;
    double* g = grad->data();
    for (std::size_t c = 0; c < n_out; ++c) {
      g[b_off + c] += z[c];
      for (std::size_t k = 0; k < H; ++k) {
        g[w_off + c * H + k] += z[c] * ht[k];
        dh[t * H + k] += z[c] * P[w_off + c * H + k];
      }
    }
  };
  for (std::size_t t = 1; t <= n; ++t) output(o.wt, o.bt, nT, index_in(tags_, ex.tags[t - 1]), t);
  output(o.wi, o.bi, nI, index_in(intents_, ex.intent), steps);
  if (!grad) return loss;

  double* g = grad->data();
  std::vector<double> da(H);
  for (std::size_t t = steps; t >= 1; --t) {
    const double* ht = &h[t * H];
    const double* hp = &h[(t - 1) * H];
    for (std::size_t j = 0; j < H; ++j) da[j] = dh[t * H + j] * (1.0 - ht[j] * ht[j]);
    const double* e0 = P + o.emb + ids[t - 1] * d;
    const double* e1 = P + o.emb + ids[t] * d;
    double* ge0 = g + o.emb + ids[t - 1] * d;
    double* ge1 = g + o.emb + ids[t] * d;
    for (std::size_t j = 0; j < H; ++j) {
      const double a = da[j];
      if (a == 0.0) continue;
      g[o.b + j] += a;
      const double* wx = P + o.wx + j * 2 * d;
      double* gwx = g + o.wx + j * 2 * d;
      for (std::size_t k = 0; k < d; ++k) {
        gwx[k] += a * e0[k];
        gwx[d + k] += a * e1[k];
        ge0[k] += a * wx[k];
        ge1[k] += a * wx[d + k];
      }
      const double* wh = P + o.wh + j * H;
      double* gwh = g + o.wh + j * H;
      for (std::size_t k = 0; k < H; ++k) {
        gwh[k] += a * hp[k];
        dh[(t - 1) * H + k] += a * wh[k];
      }
    }
  }
  return loss;
}

double LuModel::objective(std::span<const LabeledExample> examples) const {
  if (examples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& ex : examples) sum += example_loss(ex, nullptr);
  return sum / static_cast<double>(examples.size());
}

Prediction LuModel::predict(const std::vector<std::string>& tokens) const {
  Prediction out;
  const std::vector<std::size_t> ids = input_ids(tokens);
  const bool all_unknown = std::all_of(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(tokens.size()),
                                       [](std::size_t i) { return i == 0; });
  if (all_unknown) {
    out.tags.assign(tokens.size(), "O");
    out.intent = majority_intent_;
    return out;
  }
  const std::size_t d = config_.embed_dim, H = config_.hidden_dim;
  const auto o = offsets();
  const double* P = params_.data();
  std::vector<double> hp(H, 0.0), ht(H);
  auto best = [&](std::size_t w_off, std::size_t b_off, std::size_t n_out) {
    std::size_t arg = 0;
    double top = -1e300;
    for (std::size_t c = 0; c < n_out; ++c) {
      double v = P[b_off + c];
      for (std::size_t k = 0; k < H; ++k) v += P[w_off + c * H + k] * ht[k];
      if (v > top) {
        top = v;
        arg = c;
      }
    }
    return arg;
  };
  const std::size_t steps = tokens.size() + 1;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double* e0 = P + o.emb + ids[t - 1] * d;
    const double* e1 = P + o.emb + ids[t] * d;
    for (std::size_t j = 0; j < H; ++j) {
      const double* wx = P + o.wx + j * 2 * d;
      const double* wh = P + o.wh + j * H;
      double a = P[o.b + j];
      for (std::size_t k = 0; k < d; ++k) a += wx[k] * e0[k] + wx[d + k] * e1[k];
      for (std::size_t k = 0; k < H; ++k) a += wh[k] * hp[k];
      ht[j] = std::tanh(a);
    }
    if (t <= tokens.size()) out.tags.push_back(tags_[best(o.wt, o.bt, tags_.size())]);
    else out.intent = intents_[best(o.wi, o.bi, intents_.size())];
    hp = ht;
  }
  out.tags = repair_iob(std::move(out.tags));
  return out;
}

nlohmann::json LuModel::to_json() const {
  return {{"format", "dlg-lu"},     {"version", kCheckpointVersion}, {"config", lu::to_json(config_)},
          {"tokens", tokens_},      {"tags", tags_},                 {"intents", intents_},
          {"majority_intent", majority_intent_}, {"params", params_}};
}

LuModel LuModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "dlg-lu") throw CheckpointError("not an LU checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw CheckpointError("unsupported LU checkpoint version");
    LuModel m(j.at("tokens").get<std::vector<std::string>>(), j.at("tags").get<std::vector<std::string>>(),
              j.at("intents").get<std::vector<std::string>>(), lu_config_from_json(j.at("config")));
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != m.params_.size()) throw CheckpointError("parameter count does not match vocabularies");
    if (!std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); })) {
      throw CheckpointError("non-finite parameter");
    }
    m.params_ = std::move(params);
    m.majority_intent_ = j.at("majority_intent").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed LU checkpoint: ") + e.what());
  }
}

void LuModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

LuModel LuModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("malformed LU checkpoint: ") + e.what());
  }
}

LuModel train_lu(std::span<const LabeledExample> examples, const LuConfig& config, TrainReport* report) {
  LuModel model = LuModel::build(examples, config);
  if (report) {
    report->epoch_objective.clear();
    report->initial_objective = model.objective(examples);
  }
  Rng rng(config.seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.params().size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate / (1.0 + config.lr_decay * epoch);
    rng.shuffle(order);
    for (std::size_t i : order) {
      std::fill(grad.begin(), grad.end(), 0.0);
      model.example_loss(examples[i], &grad);
      double scale = lr;
      if (config.clip > 0) {
        double norm2 = 0.0;
        for (double g : grad) norm2 += g * g;
        const double norm = std::sqrt(norm2);
        if (norm > config.clip) scale *= config.clip / norm;
      }
      auto& p = model.mutable_params();
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= scale * grad[k];
    }
    if (report) report->epoch_objective.push_back(model.objective(examples));
  }
  return model;
}

std::vector<std::string> repair_iob(std::vector<std::string> tags) {
  for (std::size_t t = 0; t < tags.size(); ++t) {
    if (tags[t].size() < 2 || tags[t][0] != 'I') continue;
    const bool continues = t > 0 && tags[t - 1] != "O" && tags[t - 1].substr(2) == tags[t].substr(2);
    if (!continues) tags[t] = "O";
  }
  return tags;
}

std::vector<Span> spans_of(const std::vector<std::string>& tags) {
  std::vector<Span> out;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    if (tags[t].size() < 3) continue;
    const std::string slot = tags[t].substr(2);
    const bool begins = tags[t][0] == 'B' || t == 0 || tags[t - 1] == "O" || tags[t - 1].substr(2) != slot;
    if (begins) out.push_back({t, t + 1, slot});
    else out.back().end = t + 1;
  }
  return out;
}

DialogueAct frame_from_prediction(const std::vector<std::string>& tokens, const std::vector<std::string>& tags,
                                  const std::string& intent, std::size_t* collisions) {
  if (tokens.size() != tags.size()) throw std::invalid_argument("frame_from_prediction: shape mismatch");
  if (collisions) *collisions = 0;
  DialogueAct act;
  act.speaker = Speaker::kUser;
  IntentLabel label;
  try {
    label = parse_intent_label(intent);
  } catch (const SchemaError&) {
    label = {Intent::kNotSure, std::nullopt};
  }
  act.intent = label.intent;
  for (const auto& span : spans_of(repair_iob(tags))) {
    const auto slot = find_slot(span.slot);
    if (!slot) continue;
    const auto& info = slot_info(*slot);
    if (!info.informable && !info.requestable) continue;
    std::vector<std::string> words(tokens.begin() + static_cast<std::ptrdiff_t>(span.begin),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(span.end));
    std::string value;
    for (const auto& w : words) value += (value.empty() ? "" : " ") + w;
    value = clean_value(value);
    if (value.empty()) continue;
    if (act.inform_slots.contains(*slot) && collisions) ++*collisions;
    act.inform_slots[*slot] = value;
  }
  if (label.intent == Intent::kRequest && label.focus && !act.inform_slots.contains(*label.focus)) {
    act.request_slots.insert(*label.focus);
  }
  if (label.intent == Intent::kInform && label.focus && act.inform_slots.empty()) {
    act.inform_slots[*label.focus] = std::string(kAnything);
  }
  return act;
}

LuMetrics score_predictions(std::span<const LabeledExample> gold, std::span<const Prediction> predicted) {
  if (gold.size() != predicted.size()) throw std::invalid_argument("score_predictions: size mismatch");
  LuMetrics m;
  if (gold.empty()) return m;
  std::size_t correct = 0, tp = 0, n_gold = 0, n_pred = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].intent == predicted[i].intent) ++correct;
    const auto g = spans_of(gold[i].tags);
    const auto p = spans_of(predicted[i].tags);
    n_gold += g.size();
    n_pred += p.size();
    for (const auto& s : p) {
      if (std::find(g.begin(), g.end(), s) != g.end()) ++tp;
    }
  }
  m.intent_accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  m.slot_precision = n_pred ? static_cast<double>(tp) / static_cast<double>(n_pred) : (n_gold ? 0.0 : 1.0);
  m.slot_recall = n_gold ? static_cast<double>(tp) / static_cast<double>(n_gold) : 1.0;
  const double denom = m.slot_precision + m.slot_recall;
  m.slot_f1 = denom > 0 ? 2.0 * m.slot_precision * m.slot_recall / denom : 0.0;
  return m;
}

LuMetrics evaluate_lu(const LuModel& model, std::span<const LabeledExample> heldout) {
  if (heldout.empty()) throw std::invalid_argument("evaluate_lu: empty held-out set");
  std::vector<Prediction> preds;
  preds.reserve(heldout.size());
  for (const auto& ex : heldout) preds.push_back(model.predict(ex.tokens));
  return score_predictions(heldout, preds);
}

}  // namespace dlg::lu
