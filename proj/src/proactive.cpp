#include "provox/proactive.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace provox {

nlohmann::json suggestion_to_json(const Suggestion& s) {
  return {{"plan", render_plan(s.plan)},
          {"gloss", s.gloss},
          {"created_at", s.created_at},
          {"origin", std::string(to_string(s.origin))}};
}

std::string build_trigger(std::string_view goal) {
  if (goal.empty()) throw Error("EmptyGoal", "the proactive trigger needs a goal");
  std::string out(kTriggerPrefix);
  out += goal;
  if (goal.back() != '.') out += '.';
  return out;
}

std::string gloss_plan(const Plan& plan, const Catalog& objects) {
  std::string phrase;
  for (const auto& call : plan.calls) {
    if (!phrase.empty()) phrase += " and ";
    std::string verb = call.function;
    std::replace(verb.begin(), verb.end(), '_', ' ');
    phrase += verb;
    for (std::size_t i = 0; i < call.args.size(); ++i) {
      const auto* obj = objects.find(call.args[i]);
      phrase += (i == 0 ? " the " : " and the ");
      phrase += obj != nullptr ? obj->display_name : call.args[i];
    }
  }
  return "Should I " + phrase + " next?";
}

SuggestResult suggest_next(const UserContext& context, const Catalog& objects,
                           const std::vector<InteractionStep>& history, PlannerBackend& backend, double now) {
  const auto last_plan = std::find_if(history.rbegin(), history.rend(),
                                      [](const InteractionStep& s) { return s.kind == StepKind::Plan; });
  if (last_plan != history.rend() && (last_plan->execution == ExecutionStatus::Pending ||
                                      last_plan->execution == ExecutionStatus::Faulted))
    throw Error("WrongState", "suggestions never follow a faulted or unfinished execution");

  SuggestResult result;
  try {
    PlannerRequest request{context.goal, context.api, objects, history, ProactiveTrigger{build_trigger(context.goal)}};
    const PlannerResponse response = backend.generate(request);
    result.latency = response.latency;
    if (const auto* plan = response.plan()) {
      result.suggestion = Suggestion{*plan, gloss_plan(*plan, objects), now, Initiator::RobotProactive};
    } else if (const auto* c = response.clarification()) {
      result.note = c->text;
    } else {
      result.goal_done = true;
    }
  } catch (const Error& e) {
    spdlog::warn("proactive suggestion failed: {} ({})", e.what(), e.code());
    result.note = e.code() + ": " + e.what();
  }
  return result;
}

}  // namespace provox
