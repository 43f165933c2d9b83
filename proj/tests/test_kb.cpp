#include <gtest/gtest.h>

#include <filesystem>

#include "dlg/core/intent_label.hpp"
#include "dlg/core/rng.hpp"
#include "dlg/kb/corpus.hpp"
#include "fixtures.hpp"

using namespace dlg;
using kb::KnowledgeBase;
using kb::MovieRecord;
using kb::SymbolicQuery;

namespace {

// Reference matcher: scan every record.
bool oracle_match(const KnowledgeBase& base, const MovieRecord& rec, const SlotValues& constraints,
                  std::optional<Slot> skip = std::nullopt) {
  for (const auto& [slot, raw] : constraints) {
    if (skip && *skip == slot) continue;
    const std::string v = normalize_value(raw);
    if (v == kAnything) continue;
    bool backed = false;
    for (const auto& r : base.records()) backed |= r.values.contains(slot);
    if (!backed) continue;
    const auto it = rec.values.find(slot);
    if (it == rec.values.end() || it->second != v) return false;
  }
  return true;
}

std::vector<std::size_t> oracle_positions(const KnowledgeBase& base, const SlotValues& c,
                                          std::optional<Slot> skip = std::nullopt) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (oracle_match(base, base.records()[i], c, skip)) out.push_back(i);
  }
  return out;
}

KnowledgeBase random_kb(Rng& rng, std::size_t n) {
  const std::vector<Slot> slots = {Slot::kMovieName, Slot::kTheater, Slot::kCity, Slot::kDate, Slot::kStartTime};
  std::vector<MovieRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    MovieRecord r{i + 1, {}};
    for (Slot s : slots) {
      if (rng.uniform01() < 0.9) r.values[s] = std::string(to_string(s)) + std::to_string(rng.uniform_index(4));
    }
    records.push_back(std::move(r));
  }
  return KnowledgeBase(std::move(records));
}

}  // namespace

TEST(KnowledgeBase, SampleQueries) {
  const auto base = test::sample_kb();
  EXPECT_EQ(base.count({{{Slot::kMovieName, "zoolander 2"}}}), 3u);
  EXPECT_EQ(base.count({{{Slot::kMovieName, "Zoolander 2 "}, {Slot::kDate, "tomorrow"}}}), 2u);
  EXPECT_EQ(base.count({{{Slot::kMovieName, "zoolander 2"}, {Slot::kCity, "anything"}}}), 3u);
  EXPECT_EQ(base.count({{{Slot::kMovieName, "titanic"}}}), 0u);
  // numberofpeople is stored by no record, so it never restricts.
  EXPECT_EQ(base.count({{{Slot::kNumberOfPeople, "2"}}}), 6u);
  EXPECT_FALSE(base.backs(Slot::kNumberOfPeople));
  EXPECT_TRUE(base.goal_reachable(test::left_goal()));
  EXPECT_TRUE(base.goal_reachable(test::right_goal()));
  ASSERT_TRUE(base.first_match({test::left_goal().inform_slots}).has_value());
  EXPECT_EQ(base.records()[*base.first_match({test::left_goal().inform_slots})].id, 1u);
  EXPECT_EQ(base.find_record(4)->values.at(Slot::kStartTime), "11:45am");
  EXPECT_EQ(base.find_record(99), nullptr);
}

TEST(KnowledgeBase, LeaveOneOutCounts) {
  const auto base = test::sample_kb();
  const auto f = base.result_features(
      {{{Slot::kMovieName, "zoolander 2"}, {Slot::kDate, "friday"}, {Slot::kNumberOfPeople, "2"}}});
  EXPECT_EQ(f.count, 0u);
  EXPECT_EQ(f.per_slot_counts.at(Slot::kMovieName), 1u);
  EXPECT_EQ(f.per_slot_counts.at(Slot::kDate), 3u);
  EXPECT_EQ(f.per_slot_counts.at(Slot::kNumberOfPeople), 0u);
}

TEST(KnowledgeBase, DuplicateIdsRejected) {
  EXPECT_ANY_THROW(KnowledgeBase({MovieRecord{1, {}}, MovieRecord{1, {}}}));
}

TEST(KnowledgeBase, EmptyBase) {
  const KnowledgeBase base;
  EXPECT_EQ(base.count({{{Slot::kCity, "x"}}}), 0u);
  EXPECT_FALSE(base.first_match({}).has_value());
}

// Indexed queries agree with a linear scan on random bases and queries.
TEST(KnowledgeBase, MatchesLinearScanOracle) {
  Rng rng(2024);
  const std::vector<Slot> slots = {Slot::kMovieName, Slot::kTheater,   Slot::kCity,
                                   Slot::kDate,      Slot::kStartTime, Slot::kNumberOfPeople};
  int cases = 0;
  for (std::size_t n : {1u, 7u, 63u, 64u, 65u, 130u}) {
    const auto base = random_kb(rng, n);
    for (int q = 0; q < 200; ++q, ++cases) {
      SlotValues c;
      for (Slot s : slots) {
        const double u = rng.uniform01();
        if (u < 0.3) c[s] = std::string(to_string(s)) + std::to_string(rng.uniform_index(5));
        else if (u < 0.35) c[s] = "anything";
      }
      const SymbolicQuery query{c};
      const auto expect = oracle_positions(base, c);
      ASSERT_EQ(base.match_positions(query), expect);
      const auto f = base.result_features(query);
      ASSERT_EQ(f.count, expect.size());
      ASSERT_EQ(base.first_match(query), expect.empty() ? std::nullopt : std::optional(expect.front()));
      for (const auto& [slot, value] : c) {
        ASSERT_EQ(f.per_slot_counts.at(slot), oracle_positions(base, c, slot).size());
      }
    }
  }
  EXPECT_GE(cases, 1000);
}

TEST(KnowledgeBase, JsonlRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "dlg_test_kb";
  std::filesystem::create_directories(dir);
  const KnowledgeBase base(test::sample_kb().records(), {{Slot::kCity, {"Portland"}}});
  base.save_jsonl(dir / "kb.jsonl");
  const auto back = KnowledgeBase::load_jsonl(dir / "kb.jsonl");
  EXPECT_EQ(back.records(), base.records());
  EXPECT_EQ(back.values_of(Slot::kCity), (std::vector<std::string>{"los angeles", "portland", "seattle"}));
  std::filesystem::remove_all(dir);
}

namespace {
kb::CorpusSpec small_spec(std::uint64_t seed) {
  kb::CorpusSpec spec;
  spec.seed = seed;
  spec.n_goals = 300;
  spec.n_utterances = 500;
  return spec;
}
}  // namespace

TEST(Corpus, Deterministic) {
  const auto bank = nlg::default_template_bank();
  const auto a = kb::generate_corpus(small_spec(3), bank);
  const auto b = kb::generate_corpus(small_spec(3), bank);
  EXPECT_EQ(a.kb.records(), b.kb.records());
  EXPECT_EQ(a.goals, b.goals);
  EXPECT_EQ(a.utterances, b.utterances);
  const auto c = kb::generate_corpus(small_spec(4), bank);
  EXPECT_NE(a.goals, c.goals);
}

TEST(Corpus, ReachableFractionHitsTarget) {
  const auto bank = nlg::default_template_bank();
  for (double target : {0.5, 0.9, 1.0}) {
    auto spec = small_spec(11);
    spec.reachable_fraction_target = target;
    const auto corpus = kb::generate_corpus(spec, bank);
    EXPECT_NEAR(kb::reachable_fraction(corpus.kb, corpus.goals), target, 0.05);
    // Independent recount by linear scan.
    std::size_t hits = 0;
    for (const auto& g : corpus.goals) hits += !oracle_positions(corpus.kb, g.inform_slots).empty();
    EXPECT_DOUBLE_EQ(static_cast<double>(hits) / corpus.goals.size(),
                     kb::reachable_fraction(corpus.kb, corpus.goals));
  }
}

TEST(Corpus, GoalsAndUtterancesWellFormed) {
  const auto corpus = kb::generate_corpus(small_spec(5), nlg::default_template_bank());
  for (const auto& g : corpus.goals) ASSERT_TRUE(validate_goal(g).empty()) << to_json(g).dump();
  ASSERT_EQ(corpus.utterances.size(), 500u);
  for (const auto& u : corpus.utterances) {
    ASSERT_FALSE(u.tokens.empty());
    ASSERT_EQ(u.tokens.size(), u.tags.size());
    ASSERT_NO_THROW(parse_intent_label(u.intent)) << u.intent;
    for (const auto& t : u.tags) ASSERT_TRUE(t == "O" || t.starts_with("B-") || t.starts_with("I-")) << t;
  }
}

TEST(Corpus, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "dlg_test_corpus";
  const auto corpus = kb::generate_corpus(small_spec(6), nlg::default_template_bank());
  kb::save_corpus(corpus, dir);
  const auto back = kb::load_corpus(dir);
  EXPECT_EQ(back.kb.records(), corpus.kb.records());
  EXPECT_EQ(back.goals, corpus.goals);
  EXPECT_EQ(back.utterances, corpus.utterances);
  EXPECT_EQ(kb::to_json(back.spec), kb::to_json(corpus.spec));
  std::filesystem::remove_all(dir);
}

TEST(Corpus, ImpossibleRequestThrows) {
  auto spec = small_spec(1);
  spec.reachable_fraction_target = 1.5;
  EXPECT_THROW(kb::generate_corpus(spec, nlg::default_template_bank()), kb::GenerationError);
}
