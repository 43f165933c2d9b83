#pragma once

#include "dlg/kb/knowledge_base.hpp"

namespace dlg::test {

// Showings from the two sample dialogues plus distractors. Record 1 is the
// left dialogue's booking, record 4 the right one's.
inline kb::KnowledgeBase sample_kb() {
  auto rec = [](std::size_t id, const char* movie, const char* theater, const char* city, const char* date,
                const char* time) {
    return kb::MovieRecord{id,
                           {{Slot::kMovieName, movie},
                            {Slot::kTheater, theater},
                            {Slot::kCity, city},
                            {Slot::kDate, date},
                            {Slot::kStartTime, time}}};
  };
  return kb::KnowledgeBase({
      rec(1, "zoolander 2", "regal meridian 16", "seattle", "tomorrow", "9:25 pm"),
      rec(2, "zoolander 2", "regal meridian 16", "seattle", "today", "7:00 pm"),
      rec(3, "zoolander 2", "amc pacific place 11", "seattle", "tomorrow", "8:00 pm"),
      rec(4, "10 cloverfield lane", "regal la live stadium 14", "los angeles", "tomorrow", "11:45am"),
      rec(5, "10 cloverfield lane", "amc century city 15", "los angeles", "friday", "6:30 pm"),
      rec(6, "deadpool", "regal meridian 16", "seattle", "tomorrow", "10:00 pm"),
  });
}

inline UserGoal left_goal() {
  return {{{Slot::kCity, "seattle"},
           {Slot::kNumberOfPeople, "2"},
           {Slot::kTheater, "regal meridian 16"},
           {Slot::kStartTime, "9:25 pm"},
           {Slot::kDate, "tomorrow"},
           {Slot::kMovieName, "zoolander 2"}},
          {Slot::kTicket}};
}

inline UserGoal right_goal() {
  return {{{Slot::kNumberOfPeople, "3"}, {Slot::kDate, "tomorrow"}, {Slot::kMovieName, "10 cloverfield lane"}},
          {Slot::kTicket, Slot::kTheater, Slot::kStartTime}};
}

inline DialogueAct user(Intent intent, SlotValues informs = {}, SlotSet requests = {}) {
  return {Speaker::kUser, intent, std::move(informs), std::move(requests)};
}

inline DialogueAct agent(Intent intent, SlotValues informs = {}, SlotSet requests = {}) {
  return {Speaker::kAgent, intent, std::move(informs), std::move(requests)};
}

}  // namespace dlg::test
