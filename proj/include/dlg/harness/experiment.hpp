#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlg/env/environment.hpp"
#include "dlg/kb/corpus.hpp"
#include "dlg/lu/lu_model.hpp"
#include "dlg/rl/dqn.hpp"

namespace dlg::harness {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSetting {
  std::string code;
  error_model::ErrorSpec errors;
  env::Level level = env::Level::kFrame;
};

// B1-B3, I0-I5, S0-S6 in that order.
std::vector<ExperimentSetting> build_settings(env::Level level = env::Level::kFrame);
// std::invalid_argument for an unknown code.
ExperimentSetting find_setting(std::string_view code, env::Level level = env::Level::kFrame);

struct AnalysisGroup {
  std::string name;
  std::vector<std::string> codes;
};
// basic, intent_type, intent_rate, slot_type, slot_rate.
const std::vector<AnalysisGroup>& analysis_groups();

struct WorldConfig {
  kb::CorpusSpec corpus;
  lu::LuConfig lu;
  double heldout_fraction = 0.2;  // of the utterances, for LU scoring
};

// Corpus, templates and, when requested, a tagger trained on the first
// (1 - heldout_fraction) of the utterances and scored on the rest.
struct World {
  kb::Corpus corpus;
  nlg::TemplateBank bank;
  std::optional<lu::LuModel> lu;
  lu::LuMetrics lu_metrics;
};

World build_world(const WorldConfig& config, bool with_lu);

// Number of leading utterances used for tagger training.
std::size_t training_split(std::size_t n, double heldout_fraction);

struct ExperimentConfig {
  WorldConfig world;
  user::SimulatorConfig sim;
  rl::TrainConfig train;
  std::size_t runs = 5;
  int epochs = 300;
  std::uint64_t base_seed = 7;
  env::Level level = env::Level::kFrame;
  std::vector<std::string> settings;  // empty: all 16
  std::filesystem::path out_dir = "results";
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing keys keep their defaults.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);  // IoError
// DLG_RESULTS_DIR, when set, replaces out_dir.
void apply_env_overrides(ExperimentConfig& c);

struct MeanRow {
  int epoch = 0;
  double success_rate = 0.0;
  double avg_turns = 0.0;
  double avg_reward = 0.0;
  double buffer_size = 0.0;
  double flushed = 0.0;  // share of runs whose buffer has been flushed
  double loss = 0.0;
  bool operator==(const MeanRow&) const = default;
};

struct RunSummary {
  std::uint64_t seed = 0;
  double rule_success = 0.0;
  double upper_bound = 0.0;
  double warm_success = 0.0;
  double imitation_accuracy = 0.0;
  int first_flush_epoch = -1;
  bool operator==(const RunSummary&) const = default;
};

struct LearningCurve {
  std::string code;
  env::Level level = env::Level::kFrame;
  error_model::ErrorSpec errors;
  std::vector<MeanRow> mean;  // length = shortest run
  std::vector<std::vector<rl::CurveRow>> raw;
  std::vector<RunSummary> run_info;

  std::size_t runs() const { return raw.size(); }
  double rule_success() const;  // means over runs
  double upper_bound() const;
  double warm_success() const;
  double final_success(double fraction = 0.1) const;
  double final_turns(double fraction = 0.1) const;
  // First epoch whose mean success reaches `level`, or -1.
  int first_epoch_reaching(double level) const;
};

std::vector<MeanRow> average_curves(const std::vector<std::vector<rl::CurveRow>>& raw);

// Runs r < runs use seed base_seed + r, in parallel. When persist_dir is
// set, each finished run's raw curve is written there, so completed runs
// survive a failure of another.
LearningCurve run_experiment(const ExperimentSetting& setting, const World& world, const ExperimentConfig& config,
                             const std::filesystem::path* persist_dir = nullptr);

// Data files for one curve: <stem>.json (metadata) and <stem>_run<r>.csv.
std::string curve_stem(const std::string& code, env::Level level);
void save_curve(const LearningCurve& curve, const std::filesystem::path& dir);
LearningCurve load_curve(const std::filesystem::path& json_path);
// Every curve saved in dir, in setting order.
std::vector<LearningCurve> load_curves(const std::filesystem::path& dir);

// Per-setting mean CSV, one SVG plot per analysis group and level with
// curves present, and summary.csv. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const std::vector<LearningCurve>& curves,
                                               const std::filesystem::path& out_dir);

void write_mean_csv(const std::vector<MeanRow>& rows, const std::filesystem::path& path);
std::vector<MeanRow> read_mean_csv(const std::filesystem::path& path);

}  // namespace dlg::harness
