#include <sstream>

#include "provox/planner.hpp"

namespace provox {

namespace {

constexpr std::string_view kPreamble =
    "You are the task planner for a robot arm that works side by side with a human partner at a shared "
    "tabletop. Turn the partner's requests into programs over the robot API below, using only the listed "
    "functions and object references. When asked to propose an action, suggest the single most helpful next "
    "step toward the partner's goal. If the goal is already complete, reply with the single word DONE. If a "
    "request is ambiguous, ask a short clarifying question instead of calling a function.";

std::string python_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

void render_api(std::ostringstream& out, const Api& api, const Catalog& objects) {
  out << "```python\n";
  out << "class ObjectRef(Enum):\n";
  if (objects.empty()) out << "    pass\n";
  for (const auto& obj : objects.objects()) out << "    " << obj.id << " = " << python_string(obj.display_name) << "\n";
  out << "\n\nclass RobotAPI:\n";
  bool first = true;
  for (const auto& def : api.entries()) {
    if (!first) out << "\n";
    first = false;
    out << "    def " << def.name() << "(self";
    for (const auto& p : def.signature.params) out << ", " << p.name << ": ObjectRef";
    out << ") -> None:\n";
    out << "        \"\"\"" << def.signature.doc << "\"\"\"\n";
    if (def.is_primitive()) {
      out << "        ...\n";
      continue;
    }
    for (const auto& step : def.body->steps) {
      out << "        self." << step.function << "(";
      for (std::size_t i = 0; i < step.args.size(); ++i) {
        if (i > 0) out << ", ";
        out << (step.args[i].is_param() ? step.args[i].value : "ObjectRef." + step.args[i].value);
      }
      out << ")\n";
    }
  }
  out << "```\n";
}

std::set<std::string> container_set(const Catalog& objects) {
  std::set<std::string> out;
  for (const auto& o : objects.objects()) {
    if (o.is_container) out.insert(o.id);
  }
  return out;
}

void render_step(std::ostringstream& out, const InteractionStep& step) {
  out << "[" << step.index << "] ";
  if (step.kind == StepKind::Teaching) {
    out << "Teaching: \"" << step.utterance.value_or("") << "\" defined " << step.taught->name() << " as "
        << render_plan(step.plan) << "\n";
    return;
  }
  if (step.initiator == Initiator::User)
    out << "User: " << step.utterance.value_or("") << "\n";
  else
    out << "Robot suggestion\n";
  out << "    Plan: " << render_plan(step.plan) << " (" << to_string(step.confirmation) << ", "
      << to_string(step.execution) << ")\n";
}

}  // namespace

const std::string& PlannerRequest::input_text() const {
  return std::visit([](const auto& v) -> const std::string& { return v.text; }, input);
}

std::string assemble_prompt(const PlannerRequest& request) {
  std::ostringstream out;
  out << kPreamble << "\n\n";
  out << "Goal: " << (request.goal.empty() ? "(none)" : request.goal) << "\n\n";
  out << "API:\n";
  render_api(out, request.api, request.objects);
  out << "\nHistory:\n";
  const auto& history = request.history;
  if (history.empty()) out << "(none)\n";
  std::size_t first = 0;
  if (history.size() > kHistoryWindow) {
    first = history.size() - kHistoryWindow;
    const std::vector<InteractionStep> older(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(first));
    const auto delivered = delivered_items(older, request.api, container_set(request.objects));
    out << "(" << first << " earlier steps omitted; delivered so far: ";
    if (delivered.empty()) out << "nothing";
    for (std::size_t i = 0; i < delivered.size(); ++i) out << (i ? ", " : "") << delivered[i];
    out << ")\n";
  }
  for (std::size_t i = first; i < history.size(); ++i) render_step(out, history[i]);
  out << "\nInput:\n";
  out << (request.is_proactive() ? "Trigger: " : "User: ") << request.input_text() << "\n";
  return out.str();
}

nlohmann::json derive_tool_schema(const Api& api, const Catalog& objects) {
  const nlohmann::json ids = objects.ids();
  nlohmann::json tools = nlohmann::json::array();
  nlohmann::json names = nlohmann::json::array();
  for (const auto& def : api.entries()) {
    names.push_back(def.name());
    nlohmann::json properties = nlohmann::json::object();
    nlohmann::json required = nlohmann::json::array();
    for (const auto& p : def.signature.params) {
      properties[p.name] = {{"type", "string"}, {"description", p.description}, {"enum", ids}};
      required.push_back(p.name);
    }
    tools.push_back({{"type", "function"},
                     {"function",
                      {{"name", def.name()},
                       {"description", def.signature.doc},
                       {"parameters",
                        {{"type", "object"},
                         {"properties", properties},
                         {"required", required},
                         {"additionalProperties", false}}}}}});
  }
  nlohmann::json call_item = {
      {"type", "object"},
      {"properties",
       {{"function", {{"type", "string"}, {"enum", names}}},
        {"args", {{"type", "array"}, {"items", {{"type", "string"}, {"enum", ids}}}}}}},
      {"required", {"function", "args"}},
      {"additionalProperties", false}};
  tools.push_back(
      {{"type", "function"},
       {"function",
        {{"name", "submit_plan"},
         {"description", "Submit a plan of several calls to run in order. Each call names an API function and its "
                         "object arguments."},
         {"parameters",
          {{"type", "object"},
           {"properties",
            {{"calls", {{"type", "array"}, {"maxItems", kMaxPlanCalls}, {"items", call_item}}}}},
           {"required", {"calls"}},
           {"additionalProperties", false}}}}}});
  return tools;
}

}  // namespace provox
