#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "provox/context.hpp"
#include "provox/history.hpp"
#include "provox/planner.hpp"

namespace provox {

inline constexpr std::string_view kTriggerPrefix = "Propose an action to perform next to perform ";

// A robot-initiated plan waiting on the user.
struct Suggestion {
  Plan plan;
  std::string gloss;
  double created_at = 0.0;
  Initiator origin = Initiator::RobotProactive;

  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

nlohmann::json suggestion_to_json(const Suggestion& suggestion);

// Throws Error("EmptyGoal").
std::string build_trigger(std::string_view goal);

// "Should I pack the Skittles next?"
std::string gloss_plan(const Plan& plan, const Catalog& objects);

struct SuggestResult {
  std::optional<Suggestion> suggestion;
  bool goal_done = false;
  std::string note;  // clarification text or the swallowed error
  double latency = 0.0;
};

// Never throws on planner failure: the error is logged and reported as no
// suggestion so the user can keep instructing. WrongState when the last plan
// step faulted or is still pending.
SuggestResult suggest_next(const UserContext& context, const Catalog& objects,
                           const std::vector<InteractionStep>& history, PlannerBackend& backend, double now);

}  // namespace provox
