#include "dlg/core/dialogue_act.hpp"

#include <algorithm>
#include <cctype>

namespace dlg {

namespace {

constexpr std::string_view kReservedChars = ";=()";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Slots sorted by name rather than by enum order.
template <typename Range, typename Key>
std::vector<Slot> sorted_by_name(const Range& range, Key key) {
  std::vector<Slot> out;
  for (const auto& item : range) out.push_back(key(item));
  std::sort(out.begin(), out.end(), [](Slot a, Slot b) { return to_string(a) < to_string(b); });
  return out;
}

}  // namespace

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::kUser ? "user" : "agent";
}

std::string normalize_value(std::string_view value) {
  std::string out(trim(value));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> validate_act(const DialogueAct& act) {
  std::vector<std::string> violations;
  for (const auto& [slot, value] : act.inform_slots) {
    const auto& info = slot_info(slot);
    if (!info.informable && !info.requestable) {
      violations.push_back("slot cannot carry a value: " + std::string(info.name));
    }
    if (trim(value).empty()) {
      violations.push_back("empty value for slot: " + std::string(info.name));
    }
    if (value.find_first_of(kReservedChars) != std::string::npos) {
      violations.push_back("reserved character in value of slot: " + std::string(info.name));
    }
    if (act.request_slots.contains(slot)) {
      violations.push_back("overlap: " + std::string(info.name));
    }
  }
  for (Slot slot : act.request_slots) {
    if (act.speaker == Speaker::kUser && !slot_info(slot).requestable) {
      violations.push_back("slot not requestable: " + std::string(to_string(slot)));
    }
  }
  return violations;
}

std::string render_act(const DialogueAct& act) {
  std::string out(to_string(act.intent));
  out += '(';
  bool first = true;
  auto sep = [&] {
    if (!first) out += ';';
    first = false;
  };
  for (Slot s : sorted_by_name(act.request_slots, [](Slot s) { return s; })) {
    sep();
    out += to_string(s);
  }
  for (Slot s : sorted_by_name(act.inform_slots, [](const auto& kv) { return kv.first; })) {
    sep();
    out += to_string(s);
    out += '=';
    out += act.inform_slots.at(s);
  }
  out += ')';
  return out;
}

DialogueAct parse_act(std::string_view text, Speaker speaker) {
  text = trim(text);
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    throw FormatError("expected intent(...) but got '" + std::string(text) + "'");
  }
  DialogueAct act;
  act.speaker = speaker;
  act.intent = intent_from_string(trim(text.substr(0, open)));

  std::string_view body = text.substr(open + 1, text.size() - open - 2);
  if (body.find_first_of("()") != std::string_view::npos) {
    throw FormatError("nested parentheses in '" + std::string(text) + "'");
  }
  if (trim(body).empty()) return act;

  while (true) {
    const auto semi = body.find(';');
    const std::string_view item = trim(body.substr(0, semi));
    if (item.empty()) throw FormatError("empty slot item in '" + std::string(text) + "'");
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      const Slot slot = slot_from_string(item);
      if (!act.request_slots.insert(slot).second) {
        throw FormatError("duplicate slot '" + std::string(item) + "'");
      }
    } else {
      const Slot slot = slot_from_string(trim(item.substr(0, eq)));
      const std::string_view value = trim(item.substr(eq + 1));
      if (value.empty() || value.find('=') != std::string_view::npos) {
        throw FormatError("bad value in item '" + std::string(item) + "'");
      }
      if (!act.inform_slots.emplace(slot, std::string(value)).second) {
        throw FormatError("duplicate slot in '" + std::string(item) + "'");
      }
    }
    if (semi == std::string_view::npos) break;
    body.remove_prefix(semi + 1);
  }
  if (auto v = validate_act(act); !v.empty()) throw SchemaError(v.front());
  return act;
}

std::vector<std::string> validate_goal(const UserGoal& goal) {
  std::vector<std::string> violations;
  for (const auto& [slot, value] : goal.inform_slots) {
    if (!slot_info(slot).informable) {
      violations.push_back("slot not informable: " + std::string(to_string(slot)));
    }
    if (trim(value).empty()) {
      violations.push_back("empty value for slot: " + std::string(to_string(slot)));
    }
    if (goal.request_slots.contains(slot)) {
      violations.push_back("overlap: " + std::string(to_string(slot)));
    }
  }
  for (Slot slot : goal.request_slots) {
    if (!slot_info(slot).requestable) {
      violations.push_back("slot not requestable: " + std::string(to_string(slot)));
    }
  }
  if (goal.request_slots.empty()) violations.emplace_back("no request slots");
  return violations;
}

nlohmann::json to_json(const UserGoal& goal) {
  nlohmann::json j;
  j["inform_slots"] = nlohmann::json::object();
  for (const auto& [slot, value] : goal.inform_slots) j["inform_slots"][std::string(to_string(slot))] = value;
  j["request_slots"] = nlohmann::json::object();
  for (Slot slot : goal.request_slots) j["request_slots"][std::string(to_string(slot))] = kUnknownValue;
  return j;
}

UserGoal goal_from_json(const nlohmann::json& j) {
  UserGoal goal;
  for (const auto& [name, value] : j.at("inform_slots").items()) {
    goal.inform_slots[slot_from_string(name)] = value.get<std::string>();
  }
  for (const auto& [name, value] : j.at("request_slots").items()) {
    goal.request_slots.insert(slot_from_string(name));
  }
  return goal;
}

nlohmann::json to_json(const DialogueAct& act) {
  nlohmann::json j;
  j["speaker"] = std::string(to_string(act.speaker));
  j["act"] = render_act(act);
  return j;
}

DialogueAct act_from_json(const nlohmann::json& j) {
  const std::string speaker = j.at("speaker").get<std::string>();
  if (speaker != "user" && speaker != "agent") throw FormatError("bad speaker '" + speaker + "'");
  return parse_act(j.at("act").get<std::string>(), speaker == "user" ? Speaker::kUser : Speaker::kAgent);
}

}  // namespace dlg
