#include <gtest/gtest.h>

#include <set>

#include "dlg/core/dialogue_act.hpp"
#include "dlg/core/intent_label.hpp"
#include "dlg/core/rng.hpp"
#include "dlg/core/text.hpp"
#include "fixtures.hpp"

using namespace dlg;

TEST(Schema, Cardinalities) {
  std::set<std::string_view> intents, slots;
  for (Intent i : all_intents()) intents.insert(to_string(i));
  for (const auto& s : all_slots()) slots.insert(s.name);
  EXPECT_EQ(intents.size(), 11u);
  EXPECT_EQ(slots.size(), 29u);
}

TEST(Schema, NumberOfPeopleIsInformableOnly) {
  const auto& info = slot_info(Slot::kNumberOfPeople);
  EXPECT_TRUE(info.informable);
  EXPECT_FALSE(info.requestable);
  EXPECT_TRUE(slot_info(Slot::kTicket).requestable);
}

TEST(Schema, UnknownNamesRejected) {
  EXPECT_THROW(intent_from_string("book"), SchemaError);
  EXPECT_THROW(slot_from_string("foo"), SchemaError);
  EXPECT_EQ(intent_from_string("request"), Intent::kRequest);
  EXPECT_EQ(slot_from_string("starttime"), Slot::kStartTime);
}

TEST(Schema, DocumentListsEverything) {
  const auto doc = schema_document();
  EXPECT_EQ(doc.at("intents").size(), 11u);
  EXPECT_EQ(doc.at("slots").size(), 29u);
}

TEST(Act, RenderInform) {
  const auto act = test::user(Intent::kInform, {{Slot::kMovieName, "Titanic"}, {Slot::kStartTime, "7pm"}});
  EXPECT_EQ(render_act(act), "inform(moviename=Titanic;starttime=7pm)");
}

TEST(Act, RenderRequestPutsRequestsFirst) {
  const auto act = test::user(Intent::kRequest, {{Slot::kMovieName, "Titanic"}}, {Slot::kStartTime});
  EXPECT_EQ(render_act(act), "request(starttime;moviename=Titanic)");
  EXPECT_EQ(parse_act("request(starttime;moviename=Titanic)"), act);
}

TEST(Act, RenderEmpty) { EXPECT_EQ(render_act(test::user(Intent::kThanks)), "thanks()"); }

TEST(Act, ParseEdgeCases) {
  const auto empty = parse_act("request()");
  EXPECT_EQ(empty.intent, Intent::kRequest);
  EXPECT_TRUE(empty.inform_slots.empty());
  EXPECT_TRUE(empty.request_slots.empty());
  EXPECT_THROW(parse_act("request(foo=1)"), SchemaError);
  EXPECT_THROW(parse_act("request(starttime"), FormatError);
  EXPECT_THROW(parse_act("bogus()"), SchemaError);
  EXPECT_EQ(parse_act("  inform ( city = seattle ; date=tomorrow )"),
            test::user(Intent::kInform, {{Slot::kCity, "seattle"}, {Slot::kDate, "tomorrow"}}));
}

TEST(Act, ValidateFlagsOverlapAndNonRequestable) {
  auto act = test::user(Intent::kRequest, {{Slot::kCity, "seattle"}}, {Slot::kCity});
  EXPECT_FALSE(validate_act(act).empty());
  act = test::user(Intent::kRequest, {}, {Slot::kNumberOfPeople});
  EXPECT_FALSE(validate_act(act).empty());
  EXPECT_TRUE(validate_act(test::user(Intent::kRequest, {}, {Slot::kStartTime})).empty());
  EXPECT_TRUE(validate_act(test::agent(Intent::kRequest, {}, {Slot::kNumberOfPeople})).empty());
}

// Random valid acts round-trip through the canonical text.
TEST(Act, RoundTripProperty) {
  Rng rng(42);
  const std::vector<std::string> values = {"seattle", "9:25 pm", "zoolander 2", "a b c", "x-y", "7pm"};
  for (int trial = 0; trial < 2000; ++trial) {
    DialogueAct act;
    act.speaker = Speaker::kUser;
    act.intent = all_intents()[rng.uniform_index(kNumIntents)];
    for (const auto& info : all_slots()) {
      const double u = rng.uniform01();
      if (u < 0.1 && info.informable) {
        act.inform_slots[info.slot] = values[rng.uniform_index(values.size())];
      } else if (u < 0.15 && info.requestable) {
        act.request_slots.insert(info.slot);
      }
    }
    ASSERT_TRUE(validate_act(act).empty()) << render_act(act);
    ASSERT_EQ(parse_act(render_act(act)), act) << render_act(act);
  }
}

TEST(Goal, SampleGoalsValidate) {
  EXPECT_TRUE(validate_goal(test::left_goal()).empty());
  EXPECT_TRUE(validate_goal(test::right_goal()).empty());
}

TEST(Goal, Violations) {
  UserGoal g = test::left_goal();
  g.request_slots.insert(Slot::kNumberOfPeople);
  bool not_requestable = false;
  for (const auto& msg : validate_goal(g)) not_requestable |= msg.find("not requestable") != std::string::npos;
  EXPECT_TRUE(not_requestable);

  UserGoal overlap = test::left_goal();
  overlap.request_slots.insert(Slot::kCity);
  bool found = false;
  for (const auto& msg : validate_goal(overlap)) found |= msg.find("overlap") != std::string::npos;
  EXPECT_TRUE(found);

  UserGoal none = test::left_goal();
  none.request_slots.clear();
  EXPECT_FALSE(validate_goal(none).empty());
}

TEST(Goal, JsonRoundTrip) {
  const auto g = test::right_goal();
  const auto j = to_json(g);
  EXPECT_EQ(j.at("request_slots").at("ticket"), "UNK");
  EXPECT_EQ(goal_from_json(j), g);
}

TEST(Act, JsonRoundTrip) {
  const auto a = test::agent(Intent::kInform, {{Slot::kTaskComplete, "1"}, {Slot::kCity, "seattle"}});
  EXPECT_EQ(act_from_json(to_json(a)), a);
}

TEST(Text, NormalizeAndTokenize) {
  EXPECT_EQ(normalize_value("  Regal Meridian 16 "), "regal meridian 16");
  EXPECT_EQ(tokenize("I want 2 tickets please!"),
            (std::vector<std::string>{"i", "want", "2", "tickets", "please"}));
  EXPECT_EQ(tokenize("  ...  "), std::vector<std::string>{});
  EXPECT_EQ(join({"a", "b"}, " "), "a b");
}

TEST(IntentLabel, CompositeLabels) {
  EXPECT_EQ(to_string(composite_label(test::user(Intent::kRequest, {{Slot::kMovieName, "x"}}, {Slot::kStartTime}))),
            "request_starttime");
  EXPECT_EQ(to_string(composite_label(test::user(Intent::kInform, {{Slot::kTheater, "x"}, {Slot::kCity, "y"}}))),
            "inform_city");
  EXPECT_EQ(to_string(composite_label(test::user(Intent::kThanks))), "thanks");
  EXPECT_EQ(parse_intent_label("request_moviename"), (IntentLabel{Intent::kRequest, Slot::kMovieName}));
  EXPECT_THROW(parse_intent_label("request_foo"), SchemaError);
}

TEST(IntentLabel, ApplyLabelSwapsRequestFocus) {
  const auto act = test::user(Intent::kRequest, {{Slot::kMovieName, "x"}}, {Slot::kTheater});
  const auto out = apply_label(act, {Intent::kRequest, Slot::kStartTime});
  EXPECT_EQ(out.request_slots, SlotSet{Slot::kStartTime});
  EXPECT_EQ(out.inform_slots, act.inform_slots);
  const auto inf = apply_label(act, {Intent::kInform, Slot::kMovieName});
  EXPECT_EQ(inf.intent, Intent::kInform);
  EXPECT_TRUE(inf.request_slots.empty());
}

TEST(IntentLabel, VocabularyIsDistinctAndParsable) {
  std::set<std::string> names;
  for (const auto& l : user_label_vocabulary()) {
    names.insert(to_string(l));
    EXPECT_EQ(parse_intent_label(to_string(l)), l);
  }
  EXPECT_EQ(names.size(), user_label_vocabulary().size());
  EXPECT_TRUE(names.contains("request_theater"));
  EXPECT_TRUE(names.contains("inform_moviename"));
  EXPECT_FALSE(names.contains("request_numberofpeople"));
}

TEST(Rng, DeterministicAndUniform) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
  EXPECT_NE(Rng::derive(1, 0), Rng::derive(1, 1));
  Rng r(9);
  std::array<int, 4> counts{};
  for (int i = 0; i < 40000; ++i) ++counts[r.uniform_index(4)];
  for (int c : counts) EXPECT_NEAR(c / 40000.0, 0.25, 0.01);
}
