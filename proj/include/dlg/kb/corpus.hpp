#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlg/kb/knowledge_base.hpp"
#include "dlg/nlg/template_nlg.hpp"

namespace dlg::kb {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorpusSpec {
  std::uint64_t seed = 7;
  std::size_t n_movies = 16;
  std::size_t n_theaters = 12;
  std::size_t n_cities = 6;
  std::size_t n_goals = 600;
  double reachable_fraction_target = 0.9;
  std::size_t n_utterances = 4000;
};

nlohmann::json to_json(const CorpusSpec& spec);
CorpusSpec corpus_spec_from_json(const nlohmann::json& j);

// One tagger training pair: tokens, IOB slot tags and composite intent.
struct LabeledUtterance {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::string intent;

  bool operator==(const LabeledUtterance&) const = default;
};

struct Corpus {
  CorpusSpec spec;
  KnowledgeBase kb;
  std::vector<UserGoal> goals;
  std::vector<LabeledUtterance> utterances;
};

// Deterministic under spec.seed. The share of reachable goals is exact up
// to rounding; GenerationError when the request cannot be met.
Corpus generate_corpus(const CorpusSpec& spec, const nlg::TemplateBank& bank);

// Writes kb.jsonl, goals.jsonl, utterances.jsonl and meta.json.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

std::vector<UserGoal> load_goals_jsonl(const std::filesystem::path& path);
void save_goals_jsonl(const std::vector<UserGoal>& goals, const std::filesystem::path& path);

double reachable_fraction(const KnowledgeBase& kb, const std::vector<UserGoal>& goals);

}  // namespace dlg::kb
