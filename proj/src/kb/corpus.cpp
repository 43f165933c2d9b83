#include "dlg/kb/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "dlg/core/domain.hpp"
#include "dlg/core/intent_label.hpp"

namespace dlg::kb {

namespace {

struct MovieInfo {
  const char* name;
  const char* genre;
  const char* mpaa;
  const char* critic;
};

constexpr MovieInfo kMovies[] = {
    {"zoolander 2", "comedy", "pg-13", "4.7"},
    {"10 cloverfield lane", "thriller", "pg-13", "7.3"},
    {"deadpool", "action", "r", "8.1"},
    {"kung fu panda 3", "animation", "pg", "7.2"},
    {"zootopia", "animation", "pg", "8.0"},
    {"the witch", "horror", "r", "6.8"},
    {"london has fallen", "action", "r", "5.9"},
    {"the jungle book", "adventure", "pg", "7.5"},
    {"eddie the eagle", "drama", "pg-13", "7.4"},
    {"gods of egypt", "fantasy", "pg-13", "5.4"},
    {"triple 9", "crime", "r", "6.3"},
    {"hail caesar", "comedy", "pg-13", "6.4"},
    {"the revenant", "drama", "r", "8.0"},
    {"midnight special", "scifi", "pg-13", "6.7"},
    {"the big short", "drama", "r", "7.8"},
    {"spotlight", "drama", "r", "8.1"},
    {"risen", "drama", "pg-13", "6.3"},
    {"whiskey tango foxtrot", "comedy", "r", "6.6"},
    {"the brothers grimsby", "comedy", "r", "6.2"},
    {"allegiant", "scifi", "pg-13", "5.7"},
};

struct CityInfo {
  const char* name;
  const char* state;
};

constexpr CityInfo kCities[] = {
    {"seattle", "wa"},     {"los angeles", "ca"}, {"bellevue", "wa"}, {"portland", "or"},
    {"san francisco", "ca"}, {"chicago", "il"},   {"boston", "ma"},   {"houston", "tx"},
};

struct TheaterInfo {
  const char* name;
  const char* chain;
};

// Theater i is placed in city i mod n_cities.
constexpr TheaterInfo kTheaters[] = {
    {"regal meridian 16", "regal"},
    {"regal la live stadium 14", "regal"},
    {"cinemark lincoln square", "cinemark"},
    {"living room theaters", "independent"},
    {"century san francisco centre", "cinemark"},
    {"amc river east 21", "amc"},
    {"amc pacific place 11", "amc"},
    {"amc century city 15", "amc"},
    {"regal crossroads", "regal"},
    {"regal fox tower stadium 10", "regal"},
    {"amc metreon 16", "amc"},
    {"regal city north", "regal"},
    {"ipic redmond", "ipic"},
    {"arclight hollywood", "arclight"},
    {"regal fenway 13", "regal"},
    {"cinemark memorial city", "cinemark"},
};

constexpr const char* kDates[] = {"today", "tomorrow", "friday", "saturday", "this weekend"};
constexpr const char* kTimes[] = {"11:45am", "1:30 pm", "4:10 pm",  "6:30 pm",
                                  "7:00 pm", "8:45 pm", "9:25 pm",  "10:15 pm"};

struct FormatInfo {
  const char* name;
  const char* price;
};
constexpr FormatInfo kFormats[] = {{"standard", "12 dollars"}, {"3d", "15 dollars"}, {"imax", "18 dollars"}};

struct SlotWeight {
  Slot slot;
  double weight;
};

// Relative weights for extra request slots in goals.
constexpr SlotWeight kRequestWeights[] = {
    {Slot::kStartTime, 4}, {Slot::kTheater, 4}, {Slot::kPrice, 2},      {Slot::kMovieName, 2},
    {Slot::kCriticRating, 1}, {Slot::kGenre, 1}, {Slot::kMpaaRating, 1}, {Slot::kVideoFormat, 1},
    {Slot::kCity, 1},      {Slot::kDate, 1},
};

template <typename T, std::size_t N>
constexpr std::size_t count_of(const T (&)[N]) {
  return N;
}

std::vector<MovieRecord> generate_records(const CorpusSpec& spec, Rng& rng) {
  std::vector<std::size_t> movie_ids(spec.n_movies);
  for (std::size_t i = 0; i < spec.n_movies; ++i) movie_ids[i] = i;

  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> seen;
  std::vector<MovieRecord> records;
  for (std::size_t t = 0; t < spec.n_theaters; ++t) {
    const auto& theater = kTheaters[t];
    const auto& city = kCities[t % spec.n_cities];
    rng.shuffle(movie_ids);
    const std::size_t n_showing = std::min<std::size_t>(spec.n_movies, 5 + rng.uniform_index(4));
    for (std::size_t k = 0; k < n_showing; ++k) {
      const auto& movie = kMovies[movie_ids[k]];
      const std::size_t n_dates = 1 + rng.uniform_index(2);
      for (std::size_t d = 0; d < n_dates; ++d) {
        const std::size_t date = rng.uniform_index(count_of(kDates));
        const std::size_t n_times = 1 + rng.uniform_index(2);
        for (std::size_t m = 0; m < n_times; ++m) {
          const std::size_t time = rng.uniform_index(count_of(kTimes));
          if (!seen.emplace(t, movie_ids[k], date, time).second) continue;
          const double u = rng.uniform01();
          const auto& format = kFormats[u < 0.7 ? 0 : (u < 0.85 ? 1 : 2)];
          MovieRecord rec;
          rec.id = records.size();
          rec.values = {
              {Slot::kMovieName, movie.name},   {Slot::kGenre, movie.genre},
              {Slot::kMpaaRating, movie.mpaa},  {Slot::kCriticRating, movie.critic},
              {Slot::kTheater, theater.name},   {Slot::kTheaterChain, theater.chain},
              {Slot::kCity, city.name},         {Slot::kState, city.state},
              {Slot::kDate, kDates[date]},      {Slot::kStartTime, kTimes[time]},
              {Slot::kVideoFormat, format.name}, {Slot::kPrice, format.price},
          };
          records.push_back(std::move(rec));
        }
      }
    }
  }
  return records;
}

std::string people_value(Rng& rng) { return std::to_string(1 + rng.uniform_index(5)); }

UserGoal goal_from_record(const MovieRecord& rec, Rng& rng) {
  UserGoal goal;
  auto take = [&](Slot s, double p) {
    if (rng.bernoulli(p)) goal.inform_slots[s] = rec.values.at(s);
  };
  goal.inform_slots[Slot::kNumberOfPeople] = people_value(rng);
  take(Slot::kMovieName, 0.85);
  take(Slot::kGenre, goal.inform_slots.contains(Slot::kMovieName) ? 0.05 : 0.7);
  take(Slot::kDate, 0.75);
  take(Slot::kStartTime, 0.35);
  take(Slot::kTheater, 0.35);
  take(Slot::kCity, 0.5);
  take(Slot::kVideoFormat, 0.15);
  take(Slot::kMpaaRating, 0.05);
  take(Slot::kCriticRating, 0.05);
  take(Slot::kTheaterChain, 0.08);
  take(Slot::kState, goal.inform_slots.contains(Slot::kCity) ? 0.0 : 0.05);

  goal.request_slots.insert(Slot::kTicket);
  if (rng.bernoulli(0.55)) {
    const std::size_t n_extra = rng.bernoulli(0.3) ? 2 : 1;
    for (std::size_t k = 0; k < n_extra; ++k) {
      double total = 0;
      for (const auto& [slot, w] : kRequestWeights) {
        if (!goal.inform_slots.contains(slot) && !goal.request_slots.contains(slot)) total += w;
      }
      if (total <= 0) break;
      double u = rng.uniform01() * total;
      for (const auto& [slot, w] : kRequestWeights) {
        if (goal.inform_slots.contains(slot) || goal.request_slots.contains(slot)) continue;
        if ((u -= w) < 0) {
          goal.request_slots.insert(slot);
          break;
        }
      }
    }
  }
  return goal;
}

// Changes one database-backed constraint, or adds one, so that no record
// satisfies the goal. Returns false when no such change was found.
bool make_unreachable(UserGoal& goal, const KnowledgeBase& kb, Rng& rng) {
  std::vector<Slot> candidates;
  for (const auto& [slot, value] : goal.inform_slots) {
    if (kb.backs(slot)) candidates.push_back(slot);
  }
  for (Slot s : {Slot::kDate, Slot::kTheater, Slot::kStartTime, Slot::kCity}) {
    if (!goal.inform_slots.contains(s) && !goal.request_slots.contains(s) && kb.backs(s)) candidates.push_back(s);
  }
  if (candidates.empty()) return false;
  for (int attempt = 0; attempt < 256; ++attempt) {
    const Slot slot = candidates[rng.uniform_index(candidates.size())];
    const auto& values = kb.values_of(slot);
    UserGoal trial = goal;
    trial.inform_slots[slot] = values[rng.uniform_index(values.size())];
    if (!kb.goal_reachable(trial)) {
      goal = std::move(trial);
      return true;
    }
  }
  return false;
}

DialogueAct user_act(Intent intent, SlotValues informs = {}, SlotSet requests = {}) {
  return DialogueAct{Speaker::kUser, intent, std::move(informs), std::move(requests)};
}

// Samples one user act of the shapes the simulator produces.
DialogueAct sample_training_act(const UserGoal& goal, const KnowledgeBase& kb, Rng& rng) {
  std::vector<Slot> constraints;
  for (const auto& [slot, value] : goal.inform_slots) constraints.push_back(slot);
  std::vector<Slot> requests(goal.request_slots.begin(), goal.request_slots.end());
  const auto any_constraint = [&] { return constraints[rng.uniform_index(constraints.size())]; };

  static constexpr double kFormWeights[] = {0.25, 0.25, 0.05, 0.08, 0.06, 0.03, 0.07, 0.05, 0.05, 0.03, 0.04};
  double u = rng.uniform01() * 0.96;
  std::size_t form = 0;
  while (form + 1 < count_of(kFormWeights) && (u -= kFormWeights[form]) >= 0) ++form;

  switch (form) {
    case 0: {  // opening act: one or two constraints, maybe a request
      rng.shuffle(constraints);
      SlotValues informs;
      const std::size_t k = std::min<std::size_t>(constraints.size(), 1 + rng.uniform_index(2));
      for (std::size_t i = 0; i < k; ++i) informs[constraints[i]] = goal.inform_slots.at(constraints[i]);
      if (rng.bernoulli(0.5)) {
        return user_act(Intent::kRequest, informs, {requests[rng.uniform_index(requests.size())]});
      }
      return user_act(Intent::kInform, informs);
    }
    case 1: {
      const Slot s = any_constraint();
      return user_act(Intent::kInform, {{s, goal.inform_slots.at(s)}});
    }
    case 2: {  // restating an answered request
      const Slot s = domain::kExtraRequestSlots[rng.uniform_index(domain::kExtraRequestSlots.size())];
      const auto& values = kb.values_of(s);
      return user_act(Intent::kInform, {{s, values[rng.uniform_index(values.size())]}});
    }
    case 3: return user_act(Intent::kRequest, {}, {requests[rng.uniform_index(requests.size())]});
    case 4: {
      const Slot s = domain::kAgentRequestSlots[rng.uniform_index(domain::kAgentRequestSlots.size())];
      return user_act(Intent::kInform, {{s, std::string(kAnything)}});
    }
    case 5: return user_act(Intent::kNotSure);
    case 6: {
      const Slot s = any_constraint();
      return user_act(Intent::kDeny, {{s, goal.inform_slots.at(s)}});
    }
    case 7: return user_act(Intent::kConfirmAnswer);
    case 8: return user_act(Intent::kThanks);
    case 9: return user_act(Intent::kClosing);
    default: {  // genre-led movie search
      const auto& genres = kb.values_of(Slot::kGenre);
      SlotValues informs{{Slot::kGenre, genres[rng.uniform_index(genres.size())]}};
      if (rng.bernoulli(0.6)) {
        const auto& dates = kb.values_of(Slot::kDate);
        informs[Slot::kDate] = dates[rng.uniform_index(dates.size())];
      }
      return user_act(Intent::kRequest, informs, {Slot::kMovieName});
    }
  }
}

void validate_spec(const CorpusSpec& spec) {
  if (spec.n_movies < 1 || spec.n_theaters < 1 || spec.n_cities < 1 || spec.n_goals < 1) {
    throw GenerationError("corpus counts must be at least 1");
  }
  if (spec.n_movies > count_of(kMovies) || spec.n_theaters > count_of(kTheaters) ||
      spec.n_cities > count_of(kCities)) {
    throw GenerationError("corpus counts exceed the built-in name inventories");
  }
  if (!(spec.reachable_fraction_target >= 0.0 && spec.reachable_fraction_target <= 1.0)) {
    throw GenerationError("reachable_fraction_target must lie in [0, 1]");
  }
}

}  // namespace

nlohmann::json to_json(const CorpusSpec& spec) {
  return {{"seed", spec.seed},         {"n_movies", spec.n_movies},
          {"n_theaters", spec.n_theaters}, {"n_cities", spec.n_cities},
          {"n_goals", spec.n_goals},   {"reachable_fraction_target", spec.reachable_fraction_target},
          {"n_utterances", spec.n_utterances}};
}

CorpusSpec corpus_spec_from_json(const nlohmann::json& j) {
  CorpusSpec spec;
  spec.seed = j.value("seed", spec.seed);
  spec.n_movies = j.value("n_movies", spec.n_movies);
  spec.n_theaters = j.value("n_theaters", spec.n_theaters);
  spec.n_cities = j.value("n_cities", spec.n_cities);
  spec.n_goals = j.value("n_goals", spec.n_goals);
  spec.reachable_fraction_target = j.value("reachable_fraction_target", spec.reachable_fraction_target);
  spec.n_utterances = j.value("n_utterances", spec.n_utterances);
  return spec;
}

double reachable_fraction(const KnowledgeBase& kb, const std::vector<UserGoal>& goals) {
  if (goals.empty()) return 0.0;
  const auto n = std::count_if(goals.begin(), goals.end(), [&](const UserGoal& g) { return kb.goal_reachable(g); });
  return static_cast<double>(n) / static_cast<double>(goals.size());
}

Corpus generate_corpus(const CorpusSpec& spec, const nlg::TemplateBank& bank) {
  validate_spec(spec);
  Rng rng(spec.seed);
  Corpus corpus;
  corpus.spec = spec;

  std::map<Slot, std::vector<std::string>> extra;
  for (int n = 1; n <= domain::kMaxPeople; ++n) extra[Slot::kNumberOfPeople].push_back(std::to_string(n));
  corpus.kb = KnowledgeBase(generate_records(spec, rng), std::move(extra));
  const auto& kb = corpus.kb;

  const auto n_unreachable = static_cast<std::size_t>(
      std::lround((1.0 - spec.reachable_fraction_target) * static_cast<double>(spec.n_goals)));
  for (std::size_t i = 0; i < spec.n_goals; ++i) {
    const auto& rec = kb.records()[rng.uniform_index(kb.size())];
    UserGoal goal = goal_from_record(rec, rng);
    if (i < n_unreachable && !make_unreachable(goal, kb, rng)) {
      throw GenerationError("could not build an unreachable goal for the requested fraction");
    }
    corpus.goals.push_back(std::move(goal));
  }
  rng.shuffle(corpus.goals);
  const double achieved = reachable_fraction(kb, corpus.goals);
  if (std::abs(achieved - spec.reachable_fraction_target) > 0.05) {
    throw GenerationError("reachable fraction " + std::to_string(achieved) + " too far from target");
  }

  for (std::size_t i = 0; i < spec.n_utterances; ++i) {
    const auto& goal = corpus.goals[rng.uniform_index(corpus.goals.size())];
    const DialogueAct act = sample_training_act(goal, kb, rng);
    auto tagged = nlg::realize_tagged(act, bank, rng);
    corpus.utterances.push_back(
        {std::move(tagged.tokens), std::move(tagged.tags), to_string(composite_label(act))});
  }
  return corpus;
}

void save_goals_jsonl(const std::vector<UserGoal>& goals, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& g : goals) out << to_json(g).dump() << '\n';
}

std::vector<UserGoal> load_goals_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<UserGoal> goals;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) goals.push_back(goal_from_json(nlohmann::json::parse(line)));
  }
  return goals;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  corpus.kb.save_jsonl(dir / "kb.jsonl");
  save_goals_jsonl(corpus.goals, dir / "goals.jsonl");
  std::ofstream utt(dir / "utterances.jsonl");
  for (const auto& u : corpus.utterances) {
    utt << nlohmann::json{{"tokens", u.tokens}, {"tags", u.tags}, {"intent", u.intent}}.dump() << '\n';
  }
  std::ofstream meta(dir / "meta.json");
  meta << nlohmann::json{{"version", 1}, {"spec", to_json(corpus.spec)}}.dump(2) << '\n';
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  std::ifstream meta(dir / "meta.json");
  if (!meta) throw std::runtime_error("no corpus at " + dir.string());
  corpus.spec = corpus_spec_from_json(nlohmann::json::parse(meta).at("spec"));
  corpus.kb = KnowledgeBase::load_jsonl(dir / "kb.jsonl");
  corpus.goals = load_goals_jsonl(dir / "goals.jsonl");
  std::ifstream utt(dir / "utterances.jsonl");
  std::string line;
  while (std::getline(utt, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    corpus.utterances.push_back({j.at("tokens").get<std::vector<std::string>>(),
                                 j.at("tags").get<std::vector<std::string>>(),
                                 j.at("intent").get<std::string>()});
  }
  return corpus;
}

}  // namespace dlg::kb
