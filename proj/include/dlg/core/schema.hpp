#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dlg {

// Raised for names outside the annotation schema (unknown intent or slot).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for malformed canonical act text.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

enum class Intent : std::uint8_t {
  kRequest,
  kInform,
  kDeny,
  kConfirmQuestion,
  kConfirmAnswer,
  kGreeting,
  kClosing,
  kNotSure,
  kMultipleChoice,
  kThanks,
  kWelcome,
};
inline constexpr std::size_t kNumIntents = 11;

enum class Slot : std::uint8_t {
  kActor,
  kActress,
  kCity,
  kClosing,
  kCriticRating,
  kDate,
  kDescription,
  kDistanceConstraints,
  kGenre,
  kGreeting,
  kImplicitValue,
  kMovieSeries,
  kMovieName,
  kMpaaRating,
  kNumberOfPeople,
  kNumberOfKids,
  kTaskComplete,
  kOther,
  kPrice,
  kSeating,
  kStartTime,
  kState,
  kTheater,
  kTheaterChain,
  kVideoFormat,
  kZip,
  kResult,
  kTicket,
  kMcList,
};
inline constexpr std::size_t kNumSlots = 29;

struct SlotInfo {
  Slot slot;
  std::string_view name;
  bool informable;
  bool requestable;
};

const std::array<Intent, kNumIntents>& all_intents();
const std::array<SlotInfo, kNumSlots>& all_slots();

std::string_view to_string(Intent intent);
std::string_view to_string(Slot slot);
const SlotInfo& slot_info(Slot slot);

std::optional<Intent> find_intent(std::string_view name);
std::optional<Slot> find_slot(std::string_view name);
// Throwing variants; SchemaError on unknown names.
Intent intent_from_string(std::string_view name);
Slot slot_from_string(std::string_view name);

inline std::size_t index_of(Intent i) { return static_cast<std::size_t>(i); }
inline std::size_t index_of(Slot s) { return static_cast<std::size_t>(s); }

// Value the user gives for a slot they have no preference on.
inline constexpr std::string_view kAnything = "anything";
// Value of `taskcomplete` when no ticket could be booked.
inline constexpr std::string_view kBookingFailed = "failed";
// Marker for unknown request values in goal files.
inline constexpr std::string_view kUnknownValue = "UNK";

// Versioned machine-readable dump of intents and slots with their flags.
nlohmann::json schema_document();

}  // namespace dlg
