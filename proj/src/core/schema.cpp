#include "dlg/core/schema.hpp"

#include <algorithm>

namespace dlg {

namespace {

constexpr std::array<std::string_view, kNumIntents> kIntentNames = {
    "request", "inform",  "deny",          "confirm_question", "confirm_answer", "greeting",
    "closing", "not_sure", "multiple_choice", "thanks",           "welcome"};

// Informable: a user may constrain the search with it. Requestable: a user
// may ask the agent for its value. numberofpeople is informable only.
constexpr std::array<SlotInfo, kNumSlots> kSlots = {{
    {Slot::kActor, "actor", true, true},
    {Slot::kActress, "actress", true, true},
    {Slot::kCity, "city", true, true},
    {Slot::kClosing, "closing", false, false},
    {Slot::kCriticRating, "critic_rating", true, true},
    {Slot::kDate, "date", true, true},
    {Slot::kDescription, "description", true, true},
    {Slot::kDistanceConstraints, "distanceconstraints", true, true},
    {Slot::kGenre, "genre", true, true},
    {Slot::kGreeting, "greeting", false, false},
    {Slot::kImplicitValue, "implicit_value", true, false},
    {Slot::kMovieSeries, "movie_series", true, true},
    {Slot::kMovieName, "moviename", true, true},
    {Slot::kMpaaRating, "mpaa_rating", true, true},
    {Slot::kNumberOfPeople, "numberofpeople", true, false},
    {Slot::kNumberOfKids, "numberofkids", true, false},
    {Slot::kTaskComplete, "taskcomplete", false, true},
    {Slot::kOther, "other", true, false},
    {Slot::kPrice, "price", true, true},
    {Slot::kSeating, "seating", true, true},
    {Slot::kStartTime, "starttime", true, true},
    {Slot::kState, "state", true, true},
    {Slot::kTheater, "theater", true, true},
    {Slot::kTheaterChain, "theater_chain", true, true},
    {Slot::kVideoFormat, "video_format", true, true},
    {Slot::kZip, "zip", true, true},
    {Slot::kResult, "result", false, true},
    {Slot::kTicket, "ticket", false, true},
    {Slot::kMcList, "mc_list", false, true},
}};

constexpr bool schema_is_consistent() {
  for (std::size_t i = 0; i < kNumSlots; ++i) {
    if (static_cast<std::size_t>(kSlots[i].slot) != i) return false;
    for (std::size_t j = i + 1; j < kNumSlots; ++j) {
      if (kSlots[i].name == kSlots[j].name) return false;
    }
  }
  for (std::size_t i = 0; i < kNumIntents; ++i) {
    for (std::size_t j = i + 1; j < kNumIntents; ++j) {
      if (kIntentNames[i] == kIntentNames[j]) return false;
    }
  }
  return true;
}
static_assert(schema_is_consistent(), "slot table out of order or duplicated");

constexpr std::array<Intent, kNumIntents> make_intents() {
  std::array<Intent, kNumIntents> out{};
  for (std::size_t i = 0; i < kNumIntents; ++i) out[i] = static_cast<Intent>(i);
  return out;
}
constexpr std::array<Intent, kNumIntents> kIntents = make_intents();

}  // namespace

const std::array<Intent, kNumIntents>& all_intents() { return kIntents; }
const std::array<SlotInfo, kNumSlots>& all_slots() { return kSlots; }

std::string_view to_string(Intent intent) { return kIntentNames[index_of(intent)]; }
std::string_view to_string(Slot slot) { return kSlots[index_of(slot)].name; }
const SlotInfo& slot_info(Slot slot) { return kSlots[index_of(slot)]; }

std::optional<Intent> find_intent(std::string_view name) {
  const auto it = std::find(kIntentNames.begin(), kIntentNames.end(), name);
  if (it == kIntentNames.end()) return std::nullopt;
  return static_cast<Intent>(it - kIntentNames.begin());
}

std::optional<Slot> find_slot(std::string_view name) {
  for (const auto& info : kSlots) {
    if (info.name == name) return info.slot;
  }
  return std::nullopt;
}

Intent intent_from_string(std::string_view name) {
  if (auto i = find_intent(name)) return *i;
  throw SchemaError("unknown intent '" + std::string(name) + "'");
}

Slot slot_from_string(std::string_view name) {
  if (auto s = find_slot(name)) return *s;
  throw SchemaError("unknown slot '" + std::string(name) + "'");
}

nlohmann::json schema_document() {
  nlohmann::json doc;
  doc["version"] = kSchemaVersion;
  doc["intents"] = nlohmann::json::array();
  for (auto name : kIntentNames) doc["intents"].push_back(std::string(name));
  doc["slots"] = nlohmann::json::array();
  for (const auto& s : kSlots) {
    doc["slots"].push_back({{"name", std::string(s.name)},
                            {"informable", s.informable},
                            {"requestable", s.requestable}});
  }
  doc["markers"] = {{"anything", std::string(kAnything)},
                    {"booking_failed", std::string(kBookingFailed)},
                    {"unknown", std::string(kUnknownValue)}};
  return doc;
}

}  // namespace dlg
