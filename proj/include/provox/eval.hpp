#pragma once

// Meta-prompt efficacy: auto-accepted proactive rollouts scored against a
// primitive reference plan under four ablations of the user's context.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "provox/context.hpp"
#include "provox/session.hpp"

namespace provox {

enum class EvalCondition { Full, FixedGoal, FixedApi, FixedContext };

inline constexpr EvalCondition kAllConditions[] = {EvalCondition::Full, EvalCondition::FixedGoal,
                                                   EvalCondition::FixedApi, EvalCondition::FixedContext};

std::string_view to_string(EvalCondition condition);
EvalCondition condition_from_string(std::string_view text);
// Comma-separated list, e.g. "full,fixed-api".
std::vector<EvalCondition> parse_conditions(std::string_view text);

// full keeps everything; the fixed-goal variants swap in the neutral goal and
// the fixed-api variants drop every taught function.
UserContext make_condition_context(const UserContext& user_context, EvalCondition condition);

struct Rollout {
  Plan trace;  // inlined primitive calls that actually ran
  std::size_t steps_taken = 0;
  std::string stop_reason;  // done | no-suggestion | fault | step-cap
};

// Throws Error("InvalidArgument") when step_cap is 0.
Rollout run_proactive_rollout(const UserContext& context, const SceneSpec& scene, PlannerBackend& backend,
                              std::size_t step_cap);

// Multiset intersection of grounded calls.
std::size_t efficacy_overlap(const Plan& trace, const Plan& reference);
// Longest common subsequence of grounded calls (order-sensitive).
std::size_t lcs_overlap(const Plan& trace, const Plan& reference);

// Primitive-only, non-empty. Accepts {"calls": "pickup(A); ..."} or
// {"calls": ["pickup(A)", ...]}.
Plan reference_from_json(const nlohmann::json& json, const Catalog& objects);
Plan load_reference_file(const std::filesystem::path& path, const Catalog& objects);

struct NamedContext {
  std::string name;
  UserContext context;
};

// Every *.json file in the directory, sorted by file name.
std::vector<NamedContext> load_context_dir(const std::filesystem::path& dir, const Catalog& objects);

struct EfficacyResult {
  std::string context;
  EvalCondition condition = EvalCondition::Full;
  std::size_t helpful_actions = 0;
  std::size_t lcs = 0;
  Plan rollout;
  std::size_t steps_taken = 0;
  std::string stop_reason;
};

struct ConditionSummary {
  EvalCondition condition = EvalCondition::Full;
  std::size_t n = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double mean_lcs = 0.0;
};

struct StudyReport {
  std::vector<EfficacyResult> results;
  std::vector<ConditionSummary> summaries;
  std::size_t reference_size = 0;
  std::size_t step_cap = 0;
  std::string backend;

  const EfficacyResult* find(std::string_view context, EvalCondition condition) const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

StudyReport run_study(const std::vector<NamedContext>& contexts, const Plan& reference, const SceneSpec& scene,
                      PlannerBackend& backend, const std::vector<EvalCondition>& conditions = {
                                                   std::begin(kAllConditions), std::end(kAllConditions)});

// A deterministic stand-in for a study participant packing `items` into
// `container`. The user instructs the first item, makes a sandwich
// (`side_task_seconds` of idle time) after the first execution, and accepts
// suggestions that deliver one of the listed items. Without proactivity the
// user instructs every item in turn.
struct ScriptedUserRun {
  MetricsReport metrics;
  std::vector<InteractionStep> history;
  WorldState world;
};

ScriptedUserRun run_scripted_user(const UserContext& context, const SceneSpec& scene,
                                  const std::vector<std::string>& items, const std::string& container,
                                  bool proactive, double side_task_seconds = 60.0);

}  // namespace provox
