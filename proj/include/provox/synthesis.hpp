#pragma once

// Turns demonstrations into new API functions.
//
// Live teaching gives a trigger utterance plus a grounded decomposition; the
// constants worth abstracting are lifted to parameters (every occurrence of a
// lifted id binds to the same parameter) and a name/doc provider supplies the
// rest. The meta-prompting teach form is more direct: the user declares the
// name, behavior description, parameters and steps.

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "provox/dsl.hpp"

namespace provox {

struct TeachExample {
  std::string trigger_utterance;
  Plan decomposition;
};

struct LiftingCandidate {
  std::vector<std::string> lifted_ids;   // first-occurrence order
  std::vector<std::string> param_names;  // parallel to lifted_ids

  friend bool operator==(const LiftingCandidate&, const LiftingCandidate&) = default;
};

enum class LiftPolicy {
  Manipulated,  // pickup targets; aligned ones when the utterance names any
  AllAligned,   // every id the utterance mentions
  All,          // every distinct id
};

LiftPolicy lift_policy_from_string(std::string_view text);

struct NameDoc {
  std::string name;
  std::string doc;
};

class NameDocProvider {
 public:
  virtual ~NameDocProvider() = default;
  // Throws Error("NamingFailed") when no name can be produced.
  virtual NameDoc name_and_doc(const TeachExample& example, const LiftingCandidate& lifting,
                               const Catalog& objects) = 0;
};

// Deterministic provider: the first verb of the utterance becomes the name;
// the doc is the utterance with lifted mentions replaced by
// "a specified object".
class HeuristicNamer : public NameDocProvider {
 public:
  NameDoc name_and_doc(const TeachExample& example, const LiftingCandidate& lifting,
                       const Catalog& objects) override;
};

// Distinct argument ids of the decomposition in first-occurrence order.
std::vector<std::string> distinct_ids(const Plan& plan);

// All 2^k liftings, largest first, ties broken by first-occurrence order.
std::vector<LiftingCandidate> enumerate_liftings(const TeachExample& example);

// Ids whose display name or alias appears (whole-word, case-insensitive,
// punctuation ignored) in the utterance.
std::set<std::string> align_utterance(std::string_view utterance, const std::vector<ObjectRef>& objects);

// Ids that end up as pickup arguments once the plan is inlined.
std::set<std::string> manipulated_ids(const Plan& plan, const Api& api);

LiftingCandidate select_lifting(const TeachExample& example, const Api& api, const Catalog& objects,
                                LiftPolicy policy = LiftPolicy::Manipulated);

// Abstracts a lifting into a body template.
BodyTemplate lift_body(const Plan& decomposition, const LiftingCandidate& lifting);

// Returns `base` or the first free `base_2` .. `base_9`; NameCollision after.
std::string unique_name(const Api& api, const std::string& base);

FunctionDef synthesize_function(const TeachExample& example, const Api& api, const Catalog& objects,
                                NameDocProvider& namer, LiftPolicy policy = LiftPolicy::Manipulated);

struct TeachForm {
  std::string name;
  std::string behavior_description;
  std::vector<std::string> params;
  std::vector<TemplateCall> steps;
};

// Body steps may be given as DSL strings ("pickup($food)") or as
// {"function": ..., "args": [...]} objects.
TeachForm teach_form_from_json(const nlohmann::json& json);
nlohmann::json teach_form_to_json(const TeachForm& form);

// Builds the definition without registering it; only body constants are
// checked (UnknownObject).
FunctionDef form_to_def(const TeachForm& form, const Catalog& objects);

FunctionDef synthesize_from_form(const TeachForm& form, const Api& api, const Catalog& objects);

}  // namespace provox
