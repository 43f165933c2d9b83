#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "dlg/harness/experiment.hpp"
#include "fixtures.hpp"

using namespace dlg;
using namespace dlg::harness;
namespace em = dlg::error_model;

namespace {

struct Row {
  const char* code;
  em::IntentErrorType it;
  double ir;
  em::SlotErrorType st;
  double sr;
};

// Reference settings table, written out independently of build_settings.
const std::vector<Row>& reference_rows() {
  using IT = em::IntentErrorType;
  using ST = em::SlotErrorType;
  static const std::vector<Row> rows = {
      {"B1", IT::kRandom, 0.00, ST::kRandom, 0.00},      {"B2", IT::kRandom, 0.10, ST::kRandom, 0.10},
      {"B3", IT::kRandom, 0.20, ST::kRandom, 0.20},      {"I0", IT::kRandom, 0.10, ST::kRandom, 0.05},
      {"I1", IT::kWithinGroup, 0.10, ST::kRandom, 0.05}, {"I2", IT::kBetweenGroup, 0.10, ST::kRandom, 0.05},
      {"I3", IT::kRandom, 0.00, ST::kRandom, 0.05},      {"I4", IT::kRandom, 0.10, ST::kRandom, 0.05},
      {"I5", IT::kRandom, 0.20, ST::kRandom, 0.05},      {"S0", IT::kRandom, 0.10, ST::kRandom, 0.10},
      {"S1", IT::kRandom, 0.10, ST::kDeletion, 0.10},    {"S2", IT::kRandom, 0.10, ST::kValue, 0.10},
      {"S3", IT::kRandom, 0.10, ST::kSlot, 0.10},        {"S4", IT::kRandom, 0.10, ST::kRandom, 0.00},
      {"S5", IT::kRandom, 0.10, ST::kRandom, 0.10},      {"S6", IT::kRandom, 0.10, ST::kRandom, 0.20},
  };
  return rows;
}

ExperimentConfig tiny_config(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.world.corpus.n_goals = 60;
  c.world.corpus.n_utterances = 200;
  c.runs = 2;
  c.epochs = 3;
  c.train.dialogues_per_epoch = 10;
  c.train.eval_dialogues = 20;
  c.train.hidden = 16;
  c.train.warm_dialogues = 10;
  c.train.warm_max_epochs = 60;
  c.out_dir = out;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dlg_test_harness_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST(Settings, MatchReferenceTable) {
  const auto settings = build_settings();
  ASSERT_EQ(settings.size(), reference_rows().size());
  for (std::size_t i = 0; i < settings.size(); ++i) {
    const auto& r = reference_rows()[i];
    EXPECT_EQ(settings[i].code, r.code);
    EXPECT_EQ(settings[i].errors, (em::ErrorSpec{r.it, r.ir, r.st, r.sr})) << r.code;
    EXPECT_EQ(find_setting(r.code).errors, settings[i].errors);
  }
  EXPECT_THROW(find_setting("X9"), std::invalid_argument);
  EXPECT_EQ(build_settings(env::Level::kNaturalLanguage).front().level, env::Level::kNaturalLanguage);
}

TEST(Settings, GroupsPartitionTheSettings) {
  std::vector<std::string> all;
  for (const auto& g : analysis_groups()) all.insert(all.end(), g.codes.begin(), g.codes.end());
  std::sort(all.begin(), all.end());
  std::vector<std::string> codes;
  for (const auto& r : reference_rows()) codes.emplace_back(r.code);
  std::sort(codes.begin(), codes.end());
  EXPECT_EQ(all, codes);
  EXPECT_EQ(analysis_groups().size(), 5u);
}

// Each setting's spec, fed to the error model, produces its nominal rates.
TEST(Settings, ErrorModelHonoursEverySetting) {
  const auto base = test::sample_kb();
  const std::vector<DialogueAct> acts = {
      test::user(Intent::kInform, {{Slot::kDate, "tomorrow"}, {Slot::kTheater, "regal meridian 16"}}),
      test::user(Intent::kRequest, {{Slot::kMovieName, "deadpool"}}, {Slot::kStartTime}),
  };
  for (const auto& s : build_settings()) {
    const auto est = em::measure_rates(s.errors, acts, base, 77, 20000);
    const auto check = [](std::size_t hits, std::size_t n, double p, const std::string& what) {
      const double sd = std::sqrt(n * p * (1 - p));
      EXPECT_NEAR(static_cast<double>(hits), n * p, 4.5 * sd + 1e-9) << what;
    };
    check(est.intent_hits, est.intent_trials, s.errors.intent_rate, s.code + " intent");
    check(est.slot_hits, est.slot_trials, s.errors.slot_rate, s.code + " slot");
  }
}

TEST(Config, JsonRoundTripAndEnvOverride) {
  const auto c = tiny_config("some/where");
  const auto j = to_json(c);
  const auto back = experiment_config_from_json(j);
  EXPECT_EQ(to_json(back).dump(), j.dump());
  const auto partial = experiment_config_from_json(nlohmann::json{{"runs", 3}});
  EXPECT_EQ(partial.runs, 3u);
  EXPECT_EQ(partial.epochs, 300);

  auto over = c;
  ::setenv("DLG_RESULTS_DIR", "/tmp/elsewhere", 1);
  apply_env_overrides(over);
  ::unsetenv("DLG_RESULTS_DIR");
  EXPECT_EQ(over.out_dir, std::filesystem::path("/tmp/elsewhere"));
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), IoError);
}

TEST(World, SplitSizes) {
  EXPECT_EQ(training_split(100, 0.2), 80u);
  EXPECT_EQ(training_split(7, 0.5), 4u);
  EXPECT_THROW(training_split(10, 0.0), std::invalid_argument);
  EXPECT_THROW(training_split(10, 1.0), std::invalid_argument);
}

TEST(Curves, AverageTruncatesToShortestRun) {
  const std::vector<std::vector<rl::CurveRow>> raw = {
      {{1, 0.2, 10, 1, 100, false, 2}, {2, 0.4, 8, 3, 200, true, 1}, {3, 0.9, 6, 5, 50, true, 1}},
      {{1, 0.4, 12, 3, 300, true, 4}, {2, 0.6, 10, 5, 100, false, 3}},
  };
  const auto mean = average_curves(raw);
  ASSERT_EQ(mean.size(), 2u);
  EXPECT_NEAR(mean[0].success_rate, 0.3, 1e-12);
  EXPECT_EQ(mean[0].avg_turns, 11);
  EXPECT_EQ(mean[0].buffer_size, 200);
  EXPECT_EQ(mean[0].flushed, 0.5);
  EXPECT_EQ(mean[0].loss, 3);
  EXPECT_EQ(mean[1], (MeanRow{2, 0.5, 9, 4, 150, 0.5, 2}));

  LearningCurve curve;
  curve.raw = raw;
  curve.mean = mean;
  EXPECT_EQ(curve.first_epoch_reaching(0.5), 2);
  EXPECT_EQ(curve.first_epoch_reaching(0.9), -1);
  EXPECT_DOUBLE_EQ(curve.final_success(0.1), 0.5);
}

TEST(Curves, MeanCsvRoundTrip) {
  const auto dir = temp_dir("csv");
  const std::vector<MeanRow> rows = {{1, 0.25, 10.5, -3.5, 120.0, 0.5, 1.25}, {2, 0.125, 9.0, 2.0, 60.0, 1.0, 0.5}};
  write_mean_csv(rows, dir / "m.csv");
  EXPECT_EQ(read_mean_csv(dir / "m.csv"), rows);
  std::filesystem::remove_all(dir);
}

// Small end-to-end run: data files, reload, report artifacts.
TEST(Experiment, RunSaveLoadReport) {
  const auto dir = temp_dir("run");
  const auto config = tiny_config(dir);
  const auto world = build_world(config.world, false);
  EXPECT_FALSE(world.lu.has_value());

  std::vector<LearningCurve> curves;
  for (const char* code : {"B1", "S1"}) {
    const auto curve = run_experiment(find_setting(code), world, config, nullptr);
    ASSERT_EQ(curve.runs(), 2u);
    ASSERT_EQ(curve.mean.size(), 3u);
    EXPECT_EQ(curve.run_info[0].seed, config.base_seed);
    EXPECT_EQ(curve.run_info[1].seed, config.base_seed + 1);
    EXPECT_LE(curve.rule_success(), curve.upper_bound() + 1e-12);
    save_curve(curve, dir / "data");
    curves.push_back(curve);
  }
  // Same seeds give the same curve.
  EXPECT_EQ(run_experiment(find_setting("B1"), world, config, nullptr).raw, curves[0].raw);

  const auto loaded = load_curves(dir / "data");
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].code, "B1");
  EXPECT_EQ(loaded[1].code, "S1");
  EXPECT_EQ(loaded[0].raw, curves[0].raw);
  EXPECT_EQ(loaded[1].run_info, curves[1].run_info);
  EXPECT_EQ(loaded[1].errors, curves[1].errors);

  const auto written = emit_report(loaded, dir / "report");
  // Two mean CSVs, plots for the basic and slot_type groups, summary.
  EXPECT_EQ(written.size(), 5u);
  for (const auto& p : written) EXPECT_TRUE(std::filesystem::exists(p)) << p;
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "plot_basic.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "plot_slot_type.svg"));
  EXPECT_FALSE(std::filesystem::exists(dir / "report" / "plot_slot_rate.svg"));
  EXPECT_EQ(line_count(dir / "report" / "summary.csv"), 3u);
  EXPECT_EQ(line_count(dir / "report" / "B1.csv"), 4u);
  std::ifstream svg(dir / "report" / "plot_basic.svg");
  const std::string body((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
  EXPECT_NE(body.find("<svg"), std::string::npos);
  EXPECT_NE(body.find("B1"), std::string::npos);
  std::filesystem::remove_all(dir);
}

// Upper bound equals an independent recount over the evaluation goals.
TEST(Experiment, UpperBoundRecount) {
  const auto config = tiny_config(temp_dir("ub"));
  const auto world = build_world(config.world, false);
  const env::Environment environment(world.corpus.kb, world.corpus.goals, env::EnvConfig{});
  auto train = config.train;
  train.seed = config.base_seed;
  const auto seed = rl::eval_seed(train);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < train.eval_dialogues; ++i) {
    const auto& g = env::episode_goal(environment, seed, i);
    std::size_t matches = 0;
    for (const auto& rec : world.corpus.kb.records()) {
      bool ok = true;
      for (const auto& [slot, value] : g.inform_slots) {
        if (value == kAnything || !world.corpus.kb.backs(slot)) continue;
        const auto it = rec.values.find(slot);
        ok &= it != rec.values.end() && it->second == normalize_value(value);
      }
      matches += ok;
    }
    hits += matches > 0;
  }
  EXPECT_DOUBLE_EQ(rl::eval_upper_bound(environment, train.eval_dialogues, seed),
                   static_cast<double>(hits) / train.eval_dialogues);
}
