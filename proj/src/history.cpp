#include "provox/history.hpp"

namespace provox {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const Enum (&values)[N], const char* what) {
  for (auto v : values) {
    if (to_string(v) == text) return v;
  }
  throw Error("SchemaError", std::string("unknown ") + what + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(Initiator v) { return v == Initiator::User ? "user" : "robot-proactive"; }

std::string_view to_string(Confirmation v) {
  switch (v) {
    case Confirmation::NotRequired:
      return "not-required";
    case Confirmation::Confirmed:
      return "confirmed";
    case Confirmation::Rejected:
      return "rejected";
  }
  return "not-required";
}

std::string_view to_string(ExecutionStatus v) {
  switch (v) {
    case ExecutionStatus::Pending:
      return "pending";
    case ExecutionStatus::Completed:
      return "completed";
    case ExecutionStatus::Faulted:
      return "faulted";
    case ExecutionStatus::Skipped:
      return "skipped";
  }
  return "pending";
}

std::string_view to_string(StepKind v) { return v == StepKind::Plan ? "plan" : "teaching"; }

void check_step(const InteractionStep& step) {
  if (step.initiator == Initiator::RobotProactive && step.confirmation == Confirmation::NotRequired)
    throw Error("InvalidStep", "robot-initiated step " + std::to_string(step.index) + " bypassed confirmation");
  if (step.executed() && step.confirmation == Confirmation::Rejected)
    throw Error("InvalidStep", "rejected step " + std::to_string(step.index) + " was executed");
  if (step.t_end < step.t_start) throw Error("InvalidStep", "step " + std::to_string(step.index) + " ends before it starts");
  if (step.kind == StepKind::Teaching && !step.taught)
    throw Error("InvalidStep", "teaching step " + std::to_string(step.index) + " has no function");
}

nlohmann::json step_to_json(const InteractionStep& s) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : s.events) events.push_back(event_to_json(e));
  nlohmann::json j = {{"index", s.index},
                      {"kind", std::string(to_string(s.kind))},
                      {"initiator", std::string(to_string(s.initiator))},
                      {"utterance", s.utterance ? nlohmann::json(*s.utterance) : nlohmann::json(nullptr)},
                      {"plan", render_plan(s.plan)},
                      {"confirmation", std::string(to_string(s.confirmation))},
                      {"execution", std::string(to_string(s.execution))},
                      {"events", events},
                      {"t_start", s.t_start},
                      {"t_end", s.t_end}};
  if (s.taught) j["taught"] = function_to_json(*s.taught);
  return j;
}

InteractionStep step_from_json(const nlohmann::json& j) {
  static constexpr StepKind kinds[] = {StepKind::Plan, StepKind::Teaching};
  static constexpr Initiator initiators[] = {Initiator::User, Initiator::RobotProactive};
  static constexpr Confirmation confirmations[] = {Confirmation::NotRequired, Confirmation::Confirmed,
                                                   Confirmation::Rejected};
  static constexpr ExecutionStatus statuses[] = {ExecutionStatus::Pending, ExecutionStatus::Completed,
                                                 ExecutionStatus::Faulted, ExecutionStatus::Skipped};
  try {
    InteractionStep s;
    s.index = j.at("index").get<std::size_t>();
    s.kind = parse_enum(j.value("kind", "plan"), kinds, "step kind");
    s.initiator = parse_enum(j.at("initiator").get<std::string>(), initiators, "initiator");
    if (!j.at("utterance").is_null()) s.utterance = j.at("utterance").get<std::string>();
    s.plan = parse_plan_syntax(j.at("plan").get<std::string>());
    s.confirmation = parse_enum(j.at("confirmation").get<std::string>(), confirmations, "confirmation");
    s.execution = parse_enum(j.at("execution").get<std::string>(), statuses, "execution status");
    for (const auto& e : j.value("events", nlohmann::json::array())) s.events.push_back(event_from_json(e));
    s.t_start = j.value("t_start", 0.0);
    s.t_end = j.value("t_end", 0.0);
    if (j.contains("taught")) s.taught = function_from_json(j.at("taught"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error("SchemaError", std::string("malformed interaction step: ") + e.what());
  }
}

}  // namespace provox
