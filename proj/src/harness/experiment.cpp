#include "dlg/harness/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>

namespace dlg::harness {

namespace em = error_model;

namespace {

ExperimentSetting make(std::string code, em::IntentErrorType it, double ir, em::SlotErrorType st, double sr,
                       env::Level level) {
  return {std::move(code), em::ErrorSpec{it, ir, st, sr}, level};
}

double mean_of(const std::vector<RunSummary>& runs, double RunSummary::*field) {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : runs) s += r.*field;
  return s / static_cast<double>(runs.size());
}

std::vector<double> tail(const std::vector<MeanRow>& rows, double fraction, double MeanRow::*field) {
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows.size()))));
  std::vector<double> v;
  for (std::size_t i = rows.size() - std::min(k, rows.size()); i < rows.size(); ++i) v.push_back(rows[i].*field);
  return v;
}

double avg(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::size_t setting_rank(const std::string& code) {
  const auto all = build_settings();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].code == code) return i;
  }
  return all.size();
}

}  // namespace

std::vector<ExperimentSetting> build_settings(env::Level level) {
  using IT = em::IntentErrorType;
  using ST = em::SlotErrorType;
  return {
      make("B1", IT::kRandom, 0.00, ST::kRandom, 0.00, level),
      make("B2", IT::kRandom, 0.10, ST::kRandom, 0.10, level),
      make("B3", IT::kRandom, 0.20, ST::kRandom, 0.20, level),
      make("I0", IT::kRandom, 0.10, ST::kRandom, 0.05, level),
      make("I1", IT::kWithinGroup, 0.10, ST::kRandom, 0.05, level),
      make("I2", IT::kBetweenGroup, 0.10, ST::kRandom, 0.05, level),
      make("I3", IT::kRandom, 0.00, ST::kRandom, 0.05, level),
      make("I4", IT::kRandom, 0.10, ST::kRandom, 0.05, level),
      make("I5", IT::kRandom, 0.20, ST::kRandom, 0.05, level),
      make("S0", IT::kRandom, 0.10, ST::kRandom, 0.10, level),
      make("S1", IT::kRandom, 0.10, ST::kDeletion, 0.10, level),
      make("S2", IT::kRandom, 0.10, ST::kValue, 0.10, level),
      make("S3", IT::kRandom, 0.10, ST::kSlot, 0.10, level),
      make("S4", IT::kRandom, 0.10, ST::kRandom, 0.00, level),
      make("S5", IT::kRandom, 0.10, ST::kRandom, 0.10, level),
      make("S6", IT::kRandom, 0.10, ST::kRandom, 0.20, level),
  };
}

ExperimentSetting find_setting(std::string_view code, env::Level level) {
  for (auto& s : build_settings(level)) {
    if (s.code == code) return s;
  }
  throw std::invalid_argument("unknown setting '" + std::string(code) + "'");
}

const std::vector<AnalysisGroup>& analysis_groups() {
  static const std::vector<AnalysisGroup> groups{
      {"basic", {"B1", "B2", "B3"}},
      {"intent_type", {"I0", "I1", "I2"}},
      {"intent_rate", {"I3", "I4", "I5"}},
      {"slot_type", {"S0", "S1", "S2", "S3"}},
      {"slot_rate", {"S4", "S5", "S6"}},
  };
  return groups;
}

std::size_t training_split(std::size_t n, double heldout_fraction) {
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw std::invalid_argument("heldout_fraction must be in (0, 1)");
  }
  return static_cast<std::size_t>(std::llround((1.0 - heldout_fraction) * static_cast<double>(n)));
}

World build_world(const WorldConfig& config, bool with_lu) {
  if (!(config.heldout_fraction > 0.0 && config.heldout_fraction < 1.0)) {
    throw std::invalid_argument("heldout_fraction must be in (0, 1)");
  }
  World w;
  w.bank = nlg::default_template_bank();
  w.corpus = kb::generate_corpus(config.corpus, w.bank);
  if (with_lu) {
    std::span<const lu::LabeledExample> all(w.corpus.utterances);
    const std::size_t n_train = training_split(all.size(), config.heldout_fraction);
    w.lu = lu::train_lu(all.first(n_train), config.lu);
    w.lu_metrics = lu::evaluate_lu(*w.lu, all.subspan(n_train));
  }
  return w;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"corpus", kb::to_json(c.world.corpus)},
          {"lu", lu::to_json(c.world.lu)},
          {"heldout_fraction", c.world.heldout_fraction},
          {"simulator", user::to_json(c.sim)},
          {"train", rl::to_json(c.train)},
          {"runs", c.runs},
          {"epochs", c.epochs},
          {"seed", c.base_seed},
          {"level", std::string(env::to_string(c.level))},
          {"settings", c.settings},
          {"out", c.out_dir.string()}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("corpus")) c.world.corpus = kb::corpus_spec_from_json(j.at("corpus"));
  if (j.contains("lu")) c.world.lu = lu::lu_config_from_json(j.at("lu"));
  c.world.heldout_fraction = j.value("heldout_fraction", c.world.heldout_fraction);
  if (j.contains("simulator")) c.sim = user::simulator_config_from_json(j.at("simulator"));
  if (j.contains("train")) c.train = rl::train_config_from_json(j.at("train"));
  c.runs = j.value("runs", c.runs);
  c.epochs = j.value("epochs", c.epochs);
  c.base_seed = j.value("seed", c.base_seed);
  if (j.contains("level")) c.level = env::level_from_string(j.at("level").get<std::string>());
  if (j.contains("settings")) c.settings = j.at("settings").get<std::vector<std::string>>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  if (c.runs < 1) throw std::invalid_argument("runs must be at least 1");
  if (c.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  for (const auto& code : c.settings) find_setting(code);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed config " + path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

void apply_env_overrides(ExperimentConfig& c) {
  if (const char* dir = std::getenv("DLG_RESULTS_DIR"); dir && *dir) c.out_dir = dir;
}

double LearningCurve::rule_success() const { return mean_of(run_info, &RunSummary::rule_success); }
double LearningCurve::upper_bound() const { return mean_of(run_info, &RunSummary::upper_bound); }
double LearningCurve::warm_success() const { return mean_of(run_info, &RunSummary::warm_success); }

double LearningCurve::final_success(double fraction) const {
  return mean.empty() ? 0.0 : avg(tail(mean, fraction, &MeanRow::success_rate));
}

double LearningCurve::final_turns(double fraction) const {
  return mean.empty() ? 0.0 : avg(tail(mean, fraction, &MeanRow::avg_turns));
}

int LearningCurve::first_epoch_reaching(double level) const {
  for (const auto& r : mean) {
    if (r.success_rate >= level) return r.epoch;
  }
  return -1;
}

std::vector<MeanRow> average_curves(const std::vector<std::vector<rl::CurveRow>>& raw) {
  if (raw.empty()) return {};
  std::size_t n = raw.front().size();
  for (const auto& c : raw) n = std::min(n, c.size());
  const auto k = static_cast<double>(raw.size());
  std::vector<MeanRow> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    MeanRow& m = out[i];
    m.epoch = raw.front()[i].epoch;
    for (const auto& c : raw) {
      m.success_rate += c[i].success_rate;
      m.avg_turns += c[i].avg_turns;
      m.avg_reward += c[i].avg_reward;
      m.buffer_size += static_cast<double>(c[i].buffer_size);
      m.flushed += c[i].flushed ? 1.0 : 0.0;
      m.loss += c[i].loss;
    }
    m.success_rate /= k;
    m.avg_turns /= k;
    m.avg_reward /= k;
    m.buffer_size /= k;
    m.flushed /= k;
    m.loss /= k;
  }
  return out;
}

std::string curve_stem(const std::string& code, env::Level level) {
  return level == env::Level::kFrame ? code : code + "_nl";
}

LearningCurve run_experiment(const ExperimentSetting& setting, const World& world, const ExperimentConfig& config,
                             const std::filesystem::path* persist_dir) {
  if (config.runs < 1) throw std::invalid_argument("runs must be at least 1");
  if (setting.level == env::Level::kNaturalLanguage && !world.lu) {
    throw std::invalid_argument("natural-language runs need a trained tagger");
  }
  env::EnvConfig ec;
  ec.sim = config.sim;
  ec.level = setting.level;
  if (setting.level == env::Level::kFrame) ec.errors = setting.errors;
  const env::Environment env(world.corpus.kb, world.corpus.goals, ec, &world.bank,
                             world.lu ? &*world.lu : nullptr);

  const auto runs = config.runs;
  std::vector<std::vector<rl::CurveRow>> raw(runs);
  std::vector<RunSummary> info(runs);
  std::vector<std::exception_ptr> errors(runs);
  if (persist_dir) std::filesystem::create_directories(*persist_dir);

#pragma omp parallel for schedule(dynamic, 1) if (runs > 1)
  for (std::size_t r = 0; r < runs; ++r) {
    try {
      rl::TrainConfig tc = config.train;
      tc.seed = config.base_seed + r;
      tc.max_epochs = config.epochs;
      const rl::TrainingResult res = rl::run_training(env, tc);
      raw[r] = res.curve;
      info[r] = {tc.seed, res.rule_success, res.upper_bound, res.warm_eval.success_rate,
                 res.warm.imitation_accuracy, res.first_flush_epoch};
      if (persist_dir) {
        rl::write_curve_csv(res.curve,
                            *persist_dir / (curve_stem(setting.code, setting.level) + "_run" + std::to_string(r) + ".csv"));
      }
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  LearningCurve curve;
  curve.code = setting.code;
  curve.level = setting.level;
  curve.errors = setting.errors;
  curve.raw = std::move(raw);
  curve.run_info = std::move(info);
  curve.mean = average_curves(curve.raw);
  return curve;
}

void write_mean_csv(const std::vector<MeanRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,success_rate,avg_turns,avg_reward,buffer_size,flushed,loss\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.success_rate << ',' << r.avg_turns << ',' << r.avg_reward << ',' << r.buffer_size
        << ',' << r.flushed << ',' << r.loss << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<MeanRow> read_mean_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<MeanRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    MeanRow r;
    char c;
    ss >> r.epoch >> c >> r.success_rate >> c >> r.avg_turns >> c >> r.avg_reward >> c >> r.buffer_size >> c >>
        r.flushed >> c >> r.loss;
    if (!ss) throw IoError("malformed row in " + path.string());
    rows.push_back(r);
  }
  return rows;
}

void save_curve(const LearningCurve& curve, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = curve_stem(curve.code, curve.level);
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t r = 0; r < curve.raw.size(); ++r) {
    const auto& i = curve.run_info[r];
    const std::string file = stem + "_run" + std::to_string(r) + ".csv";
    try {
      rl::write_curve_csv(curve.raw[r], dir / file);
    } catch (const std::runtime_error& e) {
      throw IoError(e.what());
    }
    runs.push_back({{"seed", i.seed},
                    {"rule_success", i.rule_success},
                    {"upper_bound", i.upper_bound},
                    {"warm_success", i.warm_success},
                    {"imitation_accuracy", i.imitation_accuracy},
                    {"first_flush_epoch", i.first_flush_epoch},
                    {"curve", file}});
  }
  const nlohmann::json j{{"code", curve.code},
                         {"level", std::string(env::to_string(curve.level))},
                         {"errors", em::to_json(curve.errors)},
                         {"runs", runs}};
  std::ofstream out(dir / (stem + ".json"));
  if (!out) throw IoError("cannot write " + (dir / (stem + ".json")).string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + stem + ".json");
}

LearningCurve load_curve(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open " + json_path.string());
  LearningCurve curve;
  try {
    nlohmann::json j;
    in >> j;
    curve.code = j.at("code").get<std::string>();
    curve.level = env::level_from_string(j.at("level").get<std::string>());
    curve.errors = em::error_spec_from_json(j.at("errors"));
    for (const auto& r : j.at("runs")) {
      RunSummary i;
      i.seed = r.at("seed").get<std::uint64_t>();
      i.rule_success = r.at("rule_success").get<double>();
      i.upper_bound = r.at("upper_bound").get<double>();
      i.warm_success = r.at("warm_success").get<double>();
      i.imitation_accuracy = r.at("imitation_accuracy").get<double>();
      i.first_flush_epoch = r.at("first_flush_epoch").get<int>();
      curve.run_info.push_back(i);
      curve.raw.push_back(rl::read_curve_csv(json_path.parent_path() / r.at("curve").get<std::string>()));
    }
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError("cannot load " + json_path.string() + ": " + e.what());
  }
  curve.mean = average_curves(curve.raw);
  return curve;
}

std::vector<LearningCurve> load_curves(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no such directory " + dir.string());
  std::vector<LearningCurve> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") out.push_back(load_curve(entry.path()));
  }
  std::sort(out.begin(), out.end(), [](const LearningCurve& a, const LearningCurve& b) {
    return std::pair(a.level, setting_rank(a.code)) < std::pair(b.level, setting_rank(b.code));
  });
  return out;
}

}  // namespace dlg::harness
