#include <httplib.h>

#include <CLI11.hpp>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "dlg/harness/experiment.hpp"
#include "dlg/service/http_server.hpp"

using namespace dlg;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_codes(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

nlg::TemplateBank bank_for(const fs::path& corpus_dir) {
  const fs::path p = corpus_dir / "templates.json";
  return fs::exists(p) ? nlg::TemplateBank::load(p) : nlg::default_template_bank();
}

void print_metrics(const lu::LuMetrics& m, std::size_t n) {
  std::cout << nlohmann::json{{"heldout", n},
                              {"intent_accuracy", m.intent_accuracy},
                              {"slot_f1", m.slot_f1},
                              {"slot_precision", m.slot_precision},
                              {"slot_recall", m.slot_recall}}
                   .dump(2)
            << '\n';
}

int gen_corpus(const fs::path& out, const std::string& config, std::optional<std::uint64_t> seed) {
  kb::CorpusSpec spec;
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw std::runtime_error("cannot open " + config);
    spec = kb::corpus_spec_from_json(nlohmann::json::parse(in));
  }
  if (seed) spec.seed = *seed;
  const auto bank = nlg::default_template_bank();
  const auto corpus = kb::generate_corpus(spec, bank);
  kb::save_corpus(corpus, out);
  bank.save(out / "templates.json");
  std::cout << "records " << corpus.kb.records().size() << ", goals " << corpus.goals.size() << ", utterances "
            << corpus.utterances.size() << ", reachable " << kb::reachable_fraction(corpus.kb, corpus.goals) << '\n';
  return 0;
}

int lu_train(const fs::path& corpus_dir, const fs::path& out, const std::string& config, double heldout,
             std::optional<int> epochs) {
  lu::LuConfig cfg;
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw std::runtime_error("cannot open " + config);
    cfg = lu::lu_config_from_json(nlohmann::json::parse(in));
  }
  if (epochs) cfg.epochs = *epochs;
  const auto corpus = kb::load_corpus(corpus_dir);
  std::span<const lu::LabeledExample> all(corpus.utterances);
  const std::size_t n = harness::training_split(all.size(), heldout);
  lu::TrainReport report;
  const auto model = lu::train_lu(all.first(n), cfg, &report);
  model.save(out);
  std::cout << "objective " << report.initial_objective << " -> "
            << (report.epoch_objective.empty() ? report.initial_objective : report.epoch_objective.back()) << '\n';
  print_metrics(lu::evaluate_lu(model, all.subspan(n)), all.size() - n);
  return 0;
}

int lu_eval(const fs::path& corpus_dir, const fs::path& model_path, double heldout) {
  const auto corpus = kb::load_corpus(corpus_dir);
  const auto model = lu::LuModel::load(model_path);
  std::span<const lu::LabeledExample> all(corpus.utterances);
  const std::size_t n = harness::training_split(all.size(), heldout);
  print_metrics(lu::evaluate_lu(model, all.subspan(n)), all.size() - n);
  return 0;
}

int train_policy(const fs::path& corpus_dir, const std::string& code, const std::string& level_name,
                 const std::string& lu_path, int epochs, std::uint64_t seed, const fs::path& out) {
  const auto corpus = kb::load_corpus(corpus_dir);
  const auto bank = bank_for(corpus_dir);
  const auto setting = harness::find_setting(code, env::level_from_string(level_name));
  std::optional<lu::LuModel> model;
  if (setting.level == env::Level::kNaturalLanguage) {
    if (lu_path.empty()) throw std::runtime_error("natural-language training needs --lu");
    model = lu::LuModel::load(lu_path);
  }
  env::EnvConfig ec;
  ec.level = setting.level;
  if (setting.level == env::Level::kFrame) ec.errors = setting.errors;
  const env::Environment env(corpus.kb, corpus.goals, ec, &bank, model ? &*model : nullptr);
  rl::TrainConfig tc;
  tc.max_epochs = epochs;
  tc.seed = seed;
  const auto res = rl::run_training(env, tc, [](const rl::CurveRow& r, const rl::QNetwork&, const rl::QNetwork&) {
    if (r.epoch % 25 == 0) std::cerr << "epoch " << r.epoch << " success " << r.success_rate << '\n';
  });
  rl::save_checkpoint(res.net, env.encoder(), tc, out);
  std::cout << "rule " << res.rule_success << ", final " << rl::final_success(res.curve) << ", upper bound "
            << res.upper_bound << '\n';
  return 0;
}

void print_summary(const std::vector<harness::LearningCurve>& curves) {
  std::printf("%-4s %-17s %8s %8s %8s %8s\n", "code", "level", "final", "turns", "rule", "upper");
  for (const auto& c : curves) {
    std::printf("%-4s %-17s %8.3f %8.2f %8.3f %8.3f\n", c.code.c_str(), std::string(env::to_string(c.level)).c_str(),
                c.final_success(), c.final_turns(), c.rule_success(), c.upper_bound());
  }
}

int bench_run(harness::ExperimentConfig cfg) {
  harness::apply_env_overrides(cfg);
  const bool nl = cfg.level == env::Level::kNaturalLanguage;
  const auto world = harness::build_world(cfg.world, nl);
  if (nl) print_metrics(world.lu_metrics, world.corpus.utterances.size() - harness::training_split(
                                                                                 world.corpus.utterances.size(),
                                                                                 cfg.world.heldout_fraction));
  std::vector<std::string> codes = cfg.settings;
  if (codes.empty()) {
    for (const auto& s : harness::build_settings()) codes.push_back(s.code);
  }
  const fs::path data = cfg.out_dir / "data";
  fs::create_directories(data);
  {
    std::ofstream meta(cfg.out_dir / "config.json");
    meta << harness::to_json(cfg).dump(2) << '\n';
  }
  std::vector<harness::LearningCurve> curves;
  for (const auto& code : codes) {
    const auto setting = harness::find_setting(code, cfg.level);
    std::cerr << "running " << code << " (" << env::to_string(cfg.level) << ")\n";
    auto curve = harness::run_experiment(setting, world, cfg, &data);
    harness::save_curve(curve, data);
    curves.push_back(std::move(curve));
  }
  harness::emit_report(harness::load_curves(data), cfg.out_dir);
  print_summary(curves);
  return 0;
}

int bench_report(const fs::path& dir) {
  const auto curves = harness::load_curves(dir / "data");
  for (const auto& p : harness::emit_report(curves, dir)) std::cout << p.string() << '\n';
  print_summary(curves);
  return 0;
}

httplib::Server* g_server = nullptr;

int serve(const std::string& host, int port, const fs::path& corpus_dir, const std::string& checkpoint,
          const std::string& lu_path, const fs::path& log, const std::string& static_dir, std::uint64_t seed) {
  const auto corpus = kb::load_corpus(corpus_dir);
  const auto bank = bank_for(corpus_dir);
  std::optional<lu::LuModel> model;
  if (!lu_path.empty()) model = lu::LuModel::load(lu_path);
  std::optional<rl::QNetwork> net;
  const dm::StateEncoder encoder(dm::ActionSet::movie(), user::SimulatorConfig{}.max_turns);
  if (!checkpoint.empty()) net = rl::load_checkpoint(checkpoint, encoder);

  service::ServiceConfig sc;
  sc.log_path = log;
  sc.seed = seed;
  service::EvalService svc(corpus.kb, corpus.goals, bank, model ? service::lu_understander(*model) : nullptr, net,
                           sc);
  if (!svc.ready()) std::cerr << "warning: no checkpoint or tagger loaded; session creation will fail\n";

  httplib::Server server;
  service::register_routes(server, svc, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "listening on " << host << ':' << port << " (" << svc.session_count() << " stored sessions)\n";
  if (!server.listen(host, port)) {
    std::cerr << "cannot listen on " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-completion dialogue testbed"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic KB, goals and tagged utterances");
  fs::path gen_out = "corpus";
  std::string gen_config;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--config", gen_config, "Corpus spec JSON");
  gen->add_option("--seed", gen_seed, "Generator seed");

  auto* lut = app.add_subcommand("lu-train", "Train the tagger on a corpus");
  fs::path lut_corpus = "corpus", lut_out = "lu.json";
  std::string lut_config;
  double lut_heldout = 0.2;
  std::optional<int> lut_epochs;
  lut->add_option("--corpus", lut_corpus, "Corpus directory");
  lut->add_option("--out", lut_out, "Model file");
  lut->add_option("--config", lut_config, "Tagger config JSON");
  lut->add_option("--heldout", lut_heldout, "Held-out share of the utterances");
  lut->add_option("--epochs", lut_epochs, "Training epochs");

  auto* lue = app.add_subcommand("lu-eval", "Score a tagger on the held-out utterances");
  fs::path lue_corpus = "corpus", lue_model = "lu.json";
  double lue_heldout = 0.2;
  lue->add_option("--corpus", lue_corpus, "Corpus directory");
  lue->add_option("--model", lue_model, "Model file");
  lue->add_option("--heldout", lue_heldout, "Held-out share of the utterances");

  auto* tr = app.add_subcommand("train", "Train a DQN policy and save a checkpoint");
  fs::path tr_corpus = "corpus", tr_out = "policy.json";
  std::string tr_setting = "B1", tr_level = "frame", tr_lu;
  int tr_epochs = 300;
  std::uint64_t tr_seed = 7;
  tr->add_option("--corpus", tr_corpus, "Corpus directory");
  tr->add_option("--setting", tr_setting, "Error setting code");
  tr->add_option("--level", tr_level, "frame or natural_language");
  tr->add_option("--lu", tr_lu, "Tagger model for natural-language training");
  tr->add_option("--epochs", tr_epochs, "Training epochs");
  tr->add_option("--seed", tr_seed, "Seed");
  tr->add_option("--out", tr_out, "Checkpoint file");

  auto* bench = app.add_subcommand("bench", "Learning-curve experiments");
  bench->require_subcommand(1);
  auto* run = bench->add_subcommand("run", "Train over settings and write curves and a report");
  std::string run_config, run_settings, run_level;
  std::optional<std::size_t> run_runs;
  std::optional<int> run_epochs;
  std::optional<std::uint64_t> run_seed;
  std::string run_out;
  run->add_option("--config", run_config, "Experiment config JSON");
  run->add_option("--settings", run_settings, "Comma-separated setting codes (default: all)");
  run->add_option("--runs", run_runs, "Runs per setting");
  run->add_option("--epochs", run_epochs, "Epochs per run");
  run->add_option("--level", run_level, "frame or natural_language");
  run->add_option("--seed", run_seed, "Base seed");
  run->add_option("--out", run_out, "Results directory (DLG_RESULTS_DIR overrides)");
  auto* report = bench->add_subcommand("report", "Rebuild the report from saved curves");
  fs::path report_dir = "results";
  report->add_option("dir", report_dir, "Results directory")->required();

  auto* srv = app.add_subcommand("serve", "Run the human-evaluation HTTP service");
  std::string srv_host = "127.0.0.1", srv_checkpoint, srv_lu, srv_static;
  int srv_port = 8080;
  fs::path srv_corpus = "corpus", srv_log = "sessions.jsonl";
  std::uint64_t srv_seed = 7;
  srv->add_option("--host", srv_host, "Bind address")->envname("DLG_HOST");
  srv->add_option("--port", srv_port, "Port")->envname("DLG_PORT");
  srv->add_option("--corpus", srv_corpus, "Corpus directory")->envname("DLG_CORPUS");
  srv->add_option("--checkpoint", srv_checkpoint, "DQN checkpoint")->envname("DLG_CHECKPOINT");
  srv->add_option("--lu", srv_lu, "Tagger model")->envname("DLG_LU");
  srv->add_option("--log", srv_log, "Session event log")->envname("DLG_SESSION_LOG");
  srv->add_option("--static", srv_static, "Directory of static UI files")->envname("DLG_STATIC");
  srv->add_option("--seed", srv_seed, "Session seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_corpus(gen_out, gen_config, gen_seed);
    if (*lut) return lu_train(lut_corpus, lut_out, lut_config, lut_heldout, lut_epochs);
    if (*lue) return lu_eval(lue_corpus, lue_model, lue_heldout);
    if (*tr) return train_policy(tr_corpus, tr_setting, tr_level, tr_lu, tr_epochs, tr_seed, tr_out);
    if (*run) {
      harness::ExperimentConfig cfg =
          run_config.empty() ? harness::ExperimentConfig{} : harness::load_experiment_config(run_config);
      if (!run_settings.empty()) cfg.settings = split_codes(run_settings);
      for (const auto& code : cfg.settings) harness::find_setting(code);
      if (run_runs) cfg.runs = *run_runs;
      if (run_epochs) cfg.epochs = *run_epochs;
      if (run_seed) cfg.base_seed = *run_seed;
      if (!run_level.empty()) cfg.level = env::level_from_string(run_level);
      if (!run_out.empty()) cfg.out_dir = run_out;
      return bench_run(cfg);
    }
    if (*report) return bench_report(report_dir);
    if (*srv) return serve(srv_host, srv_port, srv_corpus, srv_checkpoint, srv_lu, srv_log, srv_static, srv_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
