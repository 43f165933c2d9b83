#include "dlg/nlg/template_nlg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dlg/core/domain.hpp"
#include "dlg/core/text.hpp"

namespace dlg::nlg {

namespace {

bool is_marker(std::string_view value) {
  const std::string v = normalize_value(value);
  return v == kAnything || v == kBookingFailed;
}

std::vector<Slot> sorted_slots(std::vector<Slot> slots) {
  std::sort(slots.begin(), slots.end(), [](Slot a, Slot b) { return to_string(a) < to_string(b); });
  return slots;
}

struct Segment {
  bool placeholder;
  std::string text;  // literal text or slot name
};

// Splits a sketch into literal and `$slot$` segments. Throws BankError on
// an unterminated placeholder.
std::vector<Segment> split_sketch(const std::string& sketch) {
  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < sketch.size()) {
    const auto open = sketch.find('$', i);
    if (open == std::string::npos) {
      out.push_back({false, sketch.substr(i)});
      break;
    }
    if (open > i) out.push_back({false, sketch.substr(i, open - i)});
    const auto close = sketch.find('$', open + 1);
    if (close == std::string::npos) throw BankError("unterminated placeholder in '" + sketch + "'");
    out.push_back({true, sketch.substr(open + 1, close - open - 1)});
    i = close + 1;
  }
  return out;
}

struct ParsedSignature {
  std::set<std::string> value_slots;   // informs whose value is substituted
  std::set<std::string> marker_slots;  // informs with a marker value
};

ParsedSignature parse_signature(const std::string& signature) {
  std::vector<std::string> fields;
  std::stringstream ss(signature);
  std::string field;
  while (std::getline(ss, field, '|')) fields.push_back(field);
  if (!signature.empty() && signature.back() == '|') fields.emplace_back();
  if (fields.size() != 4) throw BankError("malformed signature '" + signature + "'");
  if (fields[0] != "user" && fields[0] != "agent") throw BankError("bad speaker in '" + signature + "'");
  if (!find_intent(fields[1])) throw BankError("bad intent in '" + signature + "'");

  ParsedSignature parsed;
  std::stringstream informs(fields[2]);
  std::string item;
  while (std::getline(informs, item, ',')) {
    const auto eq = item.find('=');
    const std::string name = item.substr(0, eq);
    if (!find_slot(name)) throw BankError("bad slot '" + name + "' in '" + signature + "'");
    (eq == std::string::npos ? parsed.value_slots : parsed.marker_slots).insert(name);
  }
  std::stringstream requests(fields[3]);
  while (std::getline(requests, item, ',')) {
    if (!find_slot(item)) throw BankError("bad slot '" + item + "' in '" + signature + "'");
  }
  return parsed;
}

const std::string& choose_sketch(const DialogueAct& act, const TemplateBank& bank, Rng& rng) {
  const std::string sig = act_signature(act);
  const auto* sketches = bank.find(sig);
  if (sketches == nullptr || sketches->empty()) throw NoTemplate("no template for " + sig);
  return (*sketches)[rng.uniform_index(sketches->size())];
}

}  // namespace

std::string act_signature(const DialogueAct& act) {
  std::string sig(to_string(act.speaker));
  sig += '|';
  sig += to_string(act.intent);
  sig += '|';
  std::vector<Slot> informs;
  for (const auto& [slot, value] : act.inform_slots) informs.push_back(slot);
  bool first = true;
  for (Slot s : sorted_slots(informs)) {
    if (!first) sig += ',';
    first = false;
    sig += to_string(s);
    const auto& value = act.inform_slots.at(s);
    if (is_marker(value)) {
      sig += '=';
      sig += normalize_value(value);
    }
  }
  sig += '|';
  first = true;
  for (Slot s : sorted_slots({act.request_slots.begin(), act.request_slots.end()})) {
    if (!first) sig += ',';
    first = false;
    sig += to_string(s);
  }
  return sig;
}

void TemplateBank::add(const std::string& signature, std::string sketch) {
  auto& list = entries_[signature];
  if (std::find(list.begin(), list.end(), sketch) == list.end()) list.push_back(std::move(sketch));
}

const std::vector<std::string>* TemplateBank::find(const std::string& signature) const {
  const auto it = entries_.find(signature);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> TemplateBank::audit() const {
  std::vector<std::string> problems;
  for (const auto& [signature, sketches] : entries_) {
    try {
      const ParsedSignature parsed = parse_signature(signature);
      if (sketches.empty()) problems.push_back("no sketches for " + signature);
      for (const auto& sketch : sketches) {
        for (const auto& seg : split_sketch(sketch)) {
          if (seg.placeholder && !parsed.value_slots.contains(seg.text)) {
            problems.push_back("placeholder $" + seg.text + "$ not in signature " + signature);
          }
        }
      }
    } catch (const BankError& e) {
      problems.emplace_back(e.what());
    }
  }
  return problems;
}

nlohmann::json TemplateBank::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["templates"] = entries_;
  return j;
}

TemplateBank TemplateBank::from_json(const nlohmann::json& j) {
  TemplateBank bank;
  for (const auto& [signature, sketches] : j.at("templates").items()) {
    bank.entries_[signature] = sketches.get<std::vector<std::string>>();
  }
  if (auto problems = bank.audit(); !problems.empty()) throw BankError(problems.front());
  return bank;
}

TemplateBank TemplateBank::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BankError("cannot open template bank " + path.string());
  return from_json(nlohmann::json::parse(in));
}

void TemplateBank::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw BankError("cannot write template bank " + path.string());
  out << to_json().dump(1) << '\n';
}

std::string realize(const DialogueAct& act, const TemplateBank& bank, Rng& rng) {
  const std::string& sketch = choose_sketch(act, bank, rng);
  std::string out;
  for (const auto& seg : split_sketch(sketch)) {
    out += seg.placeholder ? act.inform_slots.at(slot_from_string(seg.text)) : seg.text;
  }
  return out;
}

TaggedUtterance realize_tagged(const DialogueAct& act, const TemplateBank& bank, Rng& rng) {
  const std::string& sketch = choose_sketch(act, bank, rng);
  TaggedUtterance out;
  for (const auto& seg : split_sketch(sketch)) {
    if (!seg.placeholder) {
      for (auto& tok : tokenize(seg.text)) {
        out.tokens.push_back(std::move(tok));
        out.tags.emplace_back("O");
      }
      continue;
    }
    const auto value_tokens = tokenize(act.inform_slots.at(slot_from_string(seg.text)));
    for (std::size_t i = 0; i < value_tokens.size(); ++i) {
      out.tokens.push_back(value_tokens[i]);
      out.tags.push_back((i == 0 ? "B-" : "I-") + seg.text);
    }
  }
  return out;
}

double coverage(const TemplateBank& bank, std::span<const DialogueAct> acts) {
  if (acts.empty()) return 1.0;
  std::size_t covered = 0;
  for (const auto& act : acts) {
    const auto* sketches = bank.find(act_signature(act));
    if (sketches != nullptr && !sketches->empty()) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(acts.size());
}

// ---------------------------------------------------------------------------
// Shipped bank.

namespace {

std::string ph(Slot s) { return "$" + std::string(to_string(s)) + "$"; }

std::string constraint_fragment(Slot s) {
  switch (s) {
    case Slot::kMovieName: return "for " + ph(s);
    case Slot::kDate: return ph(s);
    case Slot::kStartTime: return "at " + ph(s);
    case Slot::kTheater: return "at " + ph(s);
    case Slot::kCity: return "in " + ph(s);
    case Slot::kNumberOfPeople: return "for " + ph(s) + " people";
    case Slot::kVideoFormat: return "in " + ph(s);
    case Slot::kGenre: return "for a " + ph(s) + " movie";
    case Slot::kMpaaRating: return "rated " + ph(s);
    case Slot::kCriticRating: return "with a critic rating of " + ph(s);
    case Slot::kTheaterChain: return "at a " + ph(s) + " theater";
    case Slot::kState: return "in " + ph(s);
    default: return ph(s);
  }
}

std::vector<std::string> user_answer_sketches(Slot s) {
  const std::string p = ph(s);
  switch (s) {
    case Slot::kMovieName: return {"I want to watch " + p + ".", "I would like to see " + p + "."};
    case Slot::kStartTime: return {"I want to watch at " + p + ".", p + " works for me."};
    case Slot::kCity: return {"I want to watch at " + p + ".", "I am in " + p + "."};
    case Slot::kDate: return {"I want to set it up " + p + ".", "I want to go " + p + "."};
    case Slot::kTheater: return {"I want to watch at " + p + ".", "The " + p + " theater please."};
    case Slot::kNumberOfPeople: return {"I want " + p + " tickets please!", "We are " + p + " people."};
    case Slot::kVideoFormat: return {"I want it in " + p + ".", p + " please."};
    case Slot::kGenre: return {"I want a " + p + " movie.", "Something " + p + " please."};
    case Slot::kMpaaRating: return {"It should be rated " + p + ".", "Only " + p + " movies please."};
    case Slot::kCriticRating:
      return {"I want a critic rating of " + p + ".", "Critics should rate it " + p + "."};
    case Slot::kTheaterChain: return {"I prefer " + p + " theaters.", "A " + p + " theater please."};
    case Slot::kState: return {"Somewhere in " + p + " please.", "I live in " + p + "."};
    case Slot::kPrice: return {"The price is " + p + ".", "It costs " + p + "."};
    default: return {"The " + std::string(to_string(s)) + " is " + p + "."};
  }
}

std::string slot_noun(Slot s) {
  switch (s) {
    case Slot::kMovieName: return "movie";
    case Slot::kStartTime: return "time";
    case Slot::kCity: return "city";
    case Slot::kDate: return "day";
    case Slot::kTheater: return "theater";
    case Slot::kNumberOfPeople: return "number of tickets";
    case Slot::kVideoFormat: return "format";
    case Slot::kGenre: return "genre";
    case Slot::kMpaaRating: return "rating";
    case Slot::kCriticRating: return "critic score";
    case Slot::kTheaterChain: return "chain";
    case Slot::kState: return "state";
    default: return std::string(to_string(s));
  }
}

std::vector<std::string> user_request_leads(Slot s) {
  switch (s) {
    case Slot::kTicket: return {"Can I get some tickets", "I want to buy tickets"};
    case Slot::kStartTime: return {"What is the start time", "What time is it playing"};
    case Slot::kTheater: return {"Which theater is available", "Which theater can I go to"};
    case Slot::kPrice: return {"How much are the tickets", "What is the price"};
    case Slot::kCriticRating: return {"What is the critic rating", "How do critics rate it"};
    case Slot::kGenre: return {"What kind of movie is it", "What genre is it"};
    case Slot::kMpaaRating: return {"What is the mpaa rating", "What is it rated"};
    case Slot::kVideoFormat: return {"What format is available", "Which format is it showing"};
    case Slot::kCity: return {"Which city is it playing", "Where is it playing"};
    case Slot::kDate: return {"Which day is it playing", "When is it playing"};
    case Slot::kMovieName: return {"Which movies are playing", "What movies can I see"};
    default: return {"What is the " + std::string(to_string(s))};
  }
}

std::string agent_request_sketch(Slot s) {
  switch (s) {
    case Slot::kMovieName: return "What movie are you interested in?";
    case Slot::kStartTime: return "What time would you like to see it?";
    case Slot::kCity: return "What city you would like?";
    case Slot::kDate: return "What date would you like to watch it?";
    case Slot::kTheater: return "Which theater would you like?";
    case Slot::kNumberOfPeople: return "How many tickets do you need?";
    case Slot::kGenre: return "What kind of movie do you like?";
    case Slot::kCriticRating: return "What critic rating are you looking for?";
    case Slot::kMpaaRating: return "Which rating is okay for you?";
    case Slot::kVideoFormat: return "Which format do you prefer?";
    case Slot::kTheaterChain: return "Do you prefer a theater chain?";
    case Slot::kState: return "Which state are you in?";
    default: return "What " + std::string(to_string(s)) + " would you like?";
  }
}

std::string agent_inform_sketch(Slot s) {
  const std::string p = ph(s);
  switch (s) {
    case Slot::kStartTime: return p + " is available.";
    case Slot::kTheater: return p + " is available.";
    case Slot::kMovieName: return p + " is playing.";
    case Slot::kCity: return "It is playing in " + p + ".";
    case Slot::kDate: return "It is playing " + p + ".";
    case Slot::kGenre: return "It is a " + p + " movie.";
    case Slot::kMpaaRating: return "It is rated " + p + ".";
    case Slot::kCriticRating: return "Critics rate it " + p + ".";
    case Slot::kVideoFormat: return "It is showing in " + p + ".";
    case Slot::kPrice: return "Tickets are " + p + ".";
    case Slot::kTheaterChain: return "It is a " + p + " theater.";
    case Slot::kState: return "It is in " + p + ".";
    default: return "The " + std::string(to_string(s)) + " is " + p + ".";
  }
}

std::string signature_of(Speaker speaker, Intent intent, const std::vector<Slot>& informs,
                         const std::vector<Slot>& requests = {}) {
  DialogueAct act{speaker, intent, {}, {}};
  for (Slot s : informs) act.inform_slots[s] = "x";
  for (Slot s : requests) act.request_slots.insert(s);
  return act_signature(act);
}

std::string compose(const std::string& lead, const std::vector<Slot>& slots, const std::string& end) {
  std::string out = lead;
  for (Slot s : slots) out += " " + constraint_fragment(s);
  return out + end;
}

// Key-slot phrase used in booking confirmations and confirmation questions.
std::string key_phrase(const std::vector<Slot>& keys) {
  auto has = [&](Slot s) { return std::find(keys.begin(), keys.end(), s) != keys.end(); };
  std::string out = has(Slot::kNumberOfPeople) ? " " + ph(Slot::kNumberOfPeople) + " tickets" : " tickets";
  out += " for you to see";
  out += has(Slot::kMovieName) ? " " + ph(Slot::kMovieName) : " the movie";
  if (has(Slot::kDate)) out += " " + ph(Slot::kDate);
  if (has(Slot::kTheater)) out += " at " + ph(Slot::kTheater) + " theater";
  if (has(Slot::kCity)) out += " in " + ph(Slot::kCity);
  if (has(Slot::kStartTime)) out += " at " + ph(Slot::kStartTime);
  return out;
}

void add_user_templates(TemplateBank& bank) {
  using domain::kConstraintSlots;
  const std::vector<Slot> constraints(kConstraintSlots.begin(), kConstraintSlots.end());

  // Single-slot informs: answers to agent requests and one-slot first acts.
  for (Slot s : constraints) {
    const std::string sig = signature_of(Speaker::kUser, Intent::kInform, {s});
    for (auto& sketch : user_answer_sketches(s)) bank.add(sig, sketch);
    bank.add(sig, compose("I would like tickets", {s}, "."));
  }
  // Answers restating a satisfied request.
  for (Slot s : domain::kExtraRequestSlots) {
    const std::string sig = signature_of(Speaker::kUser, Intent::kInform, {s});
    for (auto& sketch : user_answer_sketches(s)) bank.add(sig, sketch);
  }
  // Two-slot first acts.
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    for (std::size_t j = i + 1; j < constraints.size(); ++j) {
      const std::vector<Slot> pair = {constraints[i], constraints[j]};
      const std::vector<Slot> rev = {constraints[j], constraints[i]};
      const std::string sig = signature_of(Speaker::kUser, Intent::kInform, pair);
      bank.add(sig, compose("I would like tickets", pair, "."));
      bank.add(sig, compose("Please find me tickets", rev, "."));
    }
  }
  // Requests, bare and with one or two constraints.
  std::vector<Slot> request_targets = {Slot::kTicket};
  request_targets.insert(request_targets.end(), domain::kExtraRequestSlots.begin(),
                         domain::kExtraRequestSlots.end());
  for (Slot r : request_targets) {
    const auto leads = user_request_leads(r);
    const std::string bare = signature_of(Speaker::kUser, Intent::kRequest, {}, {r});
    for (const auto& lead : leads) bank.add(bare, lead + "?");
    if (r == Slot::kTicket) bank.add(bare, "Could you help me to book the tickets?");

    std::vector<Slot> others;
    for (Slot c : constraints) {
      if (c != r) others.push_back(c);
    }
    for (std::size_t i = 0; i < others.size(); ++i) {
      const std::string sig1 = signature_of(Speaker::kUser, Intent::kRequest, {others[i]}, {r});
      for (const auto& lead : leads) bank.add(sig1, compose(lead, {others[i]}, "?"));
      for (std::size_t j = i + 1; j < others.size(); ++j) {
        const std::vector<Slot> pair = {others[i], others[j]};
        const std::vector<Slot> rev = {others[j], others[i]};
        const std::string sig2 = signature_of(Speaker::kUser, Intent::kRequest, pair, {r});
        bank.add(sig2, compose(leads[0], pair, "?"));
        bank.add(sig2, compose(leads[1 % leads.size()], rev, "?"));
      }
    }
  }
  // Movie search phrased around a genre.
  bank.add(signature_of(Speaker::kUser, Intent::kRequest, {Slot::kGenre}, {Slot::kMovieName}),
           "find " + ph(Slot::kGenre) + " movies");
  for (Slot c : constraints) {
    if (c == Slot::kGenre || c == Slot::kMovieName) continue;
    const std::string frag = c == Slot::kDate ? ph(c) : constraint_fragment(c);
    bank.add(signature_of(Speaker::kUser, Intent::kRequest, {Slot::kGenre, c}, {Slot::kMovieName}),
             "find " + ph(Slot::kGenre) + " movies " + frag);
  }
  // Indifference, uncertainty, corrections and closings.
  for (Slot s : domain::kAgentRequestSlots) {
    DialogueAct any{Speaker::kUser, Intent::kInform, {{s, std::string(kAnything)}}, {}};
    bank.add(act_signature(any), "I do not care about the " + slot_noun(s) + ".");
    bank.add(act_signature(any), "Any " + slot_noun(s) + " is fine.");
  }
  for (Slot s : constraints) {
    const std::string sig = signature_of(Speaker::kUser, Intent::kDeny, {s});
    bank.add(sig, "No, it should be " + ph(s) + ".");
    bank.add(sig, "That is wrong, I want " + ph(s) + ".");
  }
  const auto bare = [&](Intent intent, std::initializer_list<const char*> sketches) {
    for (const char* sk : sketches) bank.add(signature_of(Speaker::kUser, intent, {}), sk);
  };
  bare(Intent::kNotSure, {"I am not sure.", "I do not know."});
  bare(Intent::kConfirmAnswer, {"Yes, that is right.", "Correct."});
  bare(Intent::kThanks, {"Thank you.", "Thanks!"});
  bare(Intent::kClosing, {"Goodbye.", "Bye."});
  bare(Intent::kGreeting, {"Hello.", "Hi there."});
}

void add_agent_templates(TemplateBank& bank) {
  for (Slot s : domain::kAgentRequestSlots) {
    bank.add(signature_of(Speaker::kAgent, Intent::kRequest, {}, {s}), agent_request_sketch(s));
  }
  for (Slot s : domain::kAgentInformSlots) {
    bank.add(signature_of(Speaker::kAgent, Intent::kInform, {s}), agent_inform_sketch(s));
  }
  DialogueAct failed{Speaker::kAgent, Intent::kInform,
                     {{Slot::kTaskComplete, std::string(kBookingFailed)}}, {}};
  bank.add(act_signature(failed), "Sorry, I could not find any tickets matching your request.");

  // Every subset of key slots for bookings and confirmation questions.
  const std::size_t n = domain::kKeySlots.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<Slot> keys;
    for (std::size_t b = 0; b < n; ++b) {
      if (mask & (std::size_t{1} << b)) keys.push_back(domain::kKeySlots[b]);
    }
    std::vector<Slot> booking = keys;
    booking.push_back(Slot::kTaskComplete);
    const std::string book_sig = signature_of(Speaker::kAgent, Intent::kInform, booking);
    bank.add(book_sig, "Great - I was able to purchase" + key_phrase(keys) + ".");
    bank.add(book_sig, "Okay - I have booked" + key_phrase(keys) + ".");
    const std::string confirm_sig = signature_of(Speaker::kAgent, Intent::kConfirmQuestion, keys);
    if (keys.empty()) {
      bank.add(confirm_sig, "Could you confirm what you are looking for?");
    } else {
      bank.add(confirm_sig, "Just to confirm, you want" + key_phrase(keys) + "?");
    }
  }
  const auto bare = [&](Intent intent, const char* sketch) {
    bank.add(signature_of(Speaker::kAgent, intent, {}), sketch);
  };
  bare(Intent::kGreeting, "Hello, how can I help you?");
  bare(Intent::kThanks, "Thank you.");
  bare(Intent::kClosing, "Goodbye.");
  bare(Intent::kDeny, "No.");
  bare(Intent::kConfirmAnswer, "Yes.");
  bare(Intent::kMultipleChoice, "Which one would you like?");
  bare(Intent::kNotSure, "I am not sure.");
  bare(Intent::kWelcome, "You are welcome.");
}

}  // namespace

TemplateBank default_template_bank() {
  TemplateBank bank;
  add_user_templates(bank);
  add_agent_templates(bank);
  return bank;
}

}  // namespace dlg::nlg
