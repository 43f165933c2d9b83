#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlg/core/dialogue_act.hpp"
#include "dlg/core/rng.hpp"

namespace dlg::nlg {

// No sketch exists for an act's signature. This is where a learned
// generator would take over; here it is a hard error.
class NoTemplate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Signature of an act: `speaker|intent|informs|requests`, slot lists sorted
// by name and comma separated. Informs holding a marker value (`anything`,
// `failed`) appear as `slot=marker` since their sketches carry no value.
std::string act_signature(const DialogueAct& act);

// Sentence sketches with `$slot$` placeholders keyed by act signature.
class TemplateBank {
 public:
  void add(const std::string& signature, std::string sketch);

  const std::vector<std::string>* find(const std::string& signature) const;
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Returns every placeholder/signature mismatch; empty means valid.
  std::vector<std::string> audit() const;

  nlohmann::json to_json() const;
  // Audits on load; BankError lists the first problem.
  static TemplateBank from_json(const nlohmann::json& j);
  static TemplateBank load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const TemplateBank&) const = default;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

std::string realize(const DialogueAct& act, const TemplateBank& bank, Rng& rng);

struct TaggedUtterance {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;  // O, B-slot, I-slot
};

// Same sketch choice as realize() for the same rng state, returned as
// tokens with IOB tags over the substituted values.
TaggedUtterance realize_tagged(const DialogueAct& act, const TemplateBank& bank, Rng& rng);

double coverage(const TemplateBank& bank, std::span<const DialogueAct> acts);

// The shipped movie-domain bank, built from phrase fragments.
TemplateBank default_template_bank();

}  // namespace dlg::nlg
