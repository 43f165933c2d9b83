#pragma once

#include <array>

#include "dlg/core/schema.hpp"

namespace dlg::domain {

// Slots the movie database stores for each showing.
inline constexpr std::array<Slot, 12> kRecordSlots = {
    Slot::kMovieName, Slot::kGenre,    Slot::kMpaaRating, Slot::kCriticRating,
    Slot::kTheater,   Slot::kTheaterChain, Slot::kCity,   Slot::kState,
    Slot::kDate,      Slot::kStartTime, Slot::kVideoFormat, Slot::kPrice};

// Slots a user goal may constrain.
inline constexpr std::array<Slot, 12> kConstraintSlots = {
    Slot::kNumberOfPeople, Slot::kMovieName,  Slot::kDate,       Slot::kStartTime,
    Slot::kTheater,        Slot::kCity,       Slot::kVideoFormat, Slot::kGenre,
    Slot::kMpaaRating,     Slot::kCriticRating, Slot::kTheaterChain, Slot::kState};

// Slots a user goal may ask about, besides the ticket itself.
inline constexpr std::array<Slot, 10> kExtraRequestSlots = {
    Slot::kStartTime, Slot::kTheater,    Slot::kPrice, Slot::kCriticRating, Slot::kGenre,
    Slot::kMpaaRating, Slot::kVideoFormat, Slot::kCity, Slot::kDate,         Slot::kMovieName};

// Slots the agent may ask the user for.
inline constexpr std::array<Slot, 12> kAgentRequestSlots = {
    Slot::kMovieName, Slot::kStartTime, Slot::kCity,        Slot::kDate,
    Slot::kTheater,   Slot::kNumberOfPeople, Slot::kGenre,  Slot::kCriticRating,
    Slot::kMpaaRating, Slot::kVideoFormat, Slot::kTheaterChain, Slot::kState};

// Slots the agent may inform the user about; all are database-backed.
inline constexpr std::array<Slot, 12> kAgentInformSlots = kRecordSlots;

// Slots a booking confirmation or confirmation question may mention.
inline constexpr std::array<Slot, 6> kKeySlots = {Slot::kMovieName, Slot::kDate,
                                                  Slot::kTheater,   Slot::kCity,
                                                  Slot::kStartTime, Slot::kNumberOfPeople};

// The rule agent's fixed request order.
inline constexpr std::array<Slot, 6> kRulePriority = {Slot::kMovieName, Slot::kStartTime,
                                                      Slot::kCity,      Slot::kDate,
                                                      Slot::kTheater,   Slot::kNumberOfPeople};

inline constexpr int kMaxPeople = 6;

}  // namespace dlg::domain
