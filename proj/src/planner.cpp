#include "provox/planner.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "provox/text.hpp"

namespace provox {

namespace {

const std::set<std::string>& deliver_verbs() {
  static const std::set<std::string> v = {"put", "place", "pack", "bag", "move", "bring", "stash", "load", "store", "set"};
  return v;
}
const std::set<std::string>& pick_verbs() {
  static const std::set<std::string> v = {"pick", "grab", "take", "lift", "grasp", "get"};
  return v;
}
const std::set<std::string>& goto_verbs() {
  static const std::set<std::string> v = {"go", "reach", "hover", "approach"};
  return v;
}
const std::set<std::string>& release_verbs() {
  static const std::set<std::string> v = {"release", "drop", "let"};
  return v;
}
const std::set<std::string>& filler_words() {
  static const std::set<std::string> v = {"a", "an", "the", "to", "for", "and", "of", "my", "some", "this", "that"};
  return v;
}

constexpr std::size_t kMaxItemsPerPlan = kMaxPlanCalls / 3;

const char* kWhichObject = "Which object do you mean?";

// Placeholder-expanded body of a taught function: its inlining with every
// parameter left as "$name".
Plan symbolic_expansion(const FunctionDef& def, const Api& api) {
  Call call{def.name(), {}};
  for (const auto& p : def.signature.params) call.args.push_back("$" + p.name);
  return inline_plan(Plan{{call}}, api);
}

bool is_placeholder(const std::string& arg) { return !arg.empty() && arg.front() == '$'; }

// Tries to read `pattern` (with $placeholders) at calls[at...]; returns the
// bindings on success.
std::optional<std::map<std::string, std::string>> unify_at(const Plan& pattern, const Plan& plan, std::size_t at) {
  if (at + pattern.size() > plan.size()) return std::nullopt;
  std::map<std::string, std::string> binding;
  for (std::size_t j = 0; j < pattern.size(); ++j) {
    const Call& want = pattern.calls[j];
    const Call& got = plan.calls[at + j];
    if (want.function != got.function || want.args.size() != got.args.size()) return std::nullopt;
    for (std::size_t a = 0; a < want.args.size(); ++a) {
      if (!is_placeholder(want.args[a])) {
        if (want.args[a] != got.args[a]) return std::nullopt;
        continue;
      }
      auto [it, inserted] = binding.emplace(want.args[a], got.args[a]);
      if (!inserted && it->second != got.args[a]) return std::nullopt;
    }
  }
  return binding;
}

std::vector<const ObjectRef*> mentions_before(std::string_view utterance, const Catalog& objects,
                                              std::size_t* first_offset) {
  std::vector<const ObjectRef*> out;
  const auto mentions = text::mentioned_objects(utterance, objects);
  *first_offset = mentions.empty() ? utterance.size() : mentions.front().mention.offset;
  for (const auto& m : mentions) out.push_back(m.object);
  return out;
}

std::set<std::string> body_constants(const FunctionDef& def, const Api& api) {
  std::set<std::string> out;
  for (const auto& call : symbolic_expansion(def, api).calls) {
    for (const auto& arg : call.args) {
      if (!is_placeholder(arg)) out.insert(arg);
    }
  }
  return out;
}

// Taught function named (or doc-verbed) in the words leading up to the
// first object mention.
std::optional<Plan> match_taught(std::string_view utterance, const PlannerRequest& request) {
  std::size_t first_offset = 0;
  const auto mentioned = mentions_before(utterance, request.objects, &first_offset);
  const std::string lead = text::normalize(utterance.substr(0, first_offset));
  const auto lead_tokens = text::tokens(lead);
  std::set<std::string> lead_stems;
  for (const auto& t : lead_tokens) lead_stems.insert(text::stem(t));
  const std::string padded_lead = " " + lead + " ";

  for (const auto& def : request.api.taught()) {
    std::string phrase;
    for (const auto& w : text::identifier_words(def.name())) phrase += (phrase.empty() ? "" : " ") + w;
    bool hit = !phrase.empty() && padded_lead.find(" " + phrase + " ") != std::string::npos;
    if (!hit) {
      const auto doc_tokens = text::tokens(def.signature.doc);
      if (!doc_tokens.empty() && !filler_words().count(doc_tokens.front()))
        hit = lead_stems.count(text::stem(doc_tokens.front())) > 0;
    }
    if (!hit) continue;

    const auto constants = body_constants(def, request.api);
    std::vector<std::string> candidates;
    for (const auto* obj : mentioned) {
      if (!constants.count(obj->id)) candidates.push_back(obj->id);
    }
    const std::size_t arity = def.signature.arity();
    if (arity == 0) return Plan{{Call{def.name(), {}}}};
    if (candidates.size() < arity) continue;
    Plan plan;
    for (std::size_t i = 0; i + arity <= candidates.size() && plan.size() < kMaxItemsPerPlan; i += arity) {
      plan.calls.push_back(Call{def.name(), {candidates.begin() + static_cast<std::ptrdiff_t>(i),
                                             candidates.begin() + static_cast<std::ptrdiff_t>(i + arity)}});
    }
    return plan;
  }
  return std::nullopt;
}

Plan deliver(const std::vector<std::string>& items, const std::string& container) {
  Plan plan;
  for (const auto& item : items) {
    plan.calls.push_back({"pickup", {item}});
    plan.calls.push_back({"goto", {container}});
    plan.calls.push_back({"release", {}});
  }
  return plan;
}

PlannerResponse interpret_utterance(const PlannerRequest& request) {
  const std::string& utterance = request.input_text();
  if (auto taught = match_taught(utterance, request)) return {*taught};

  std::vector<std::string> items;
  std::vector<std::string> containers;
  std::vector<std::string> any;
  for (const auto& m : text::mentioned_objects(utterance, request.objects)) {
    any.push_back(m.object->id);
    (m.object->is_container ? containers : items).push_back(m.object->id);
  }

  for (const auto& token : text::tokens(utterance)) {
    const std::string verb = text::stem(token);
    const auto is = [&](const std::set<std::string>& verbs) { return verbs.count(token) || verbs.count(verb); };
    if (is(deliver_verbs())) {
      if (items.empty()) return {Clarification{kWhichObject}};
      std::optional<std::string> container;
      if (!containers.empty())
        container = containers.front();
      else
        container = extract_targets(request.goal, request.api, request.objects).container;
      if (!container) return {Clarification{"Where should I put it?"}};
      if (items.size() > kMaxItemsPerPlan) items.resize(kMaxItemsPerPlan);
      return {compress_plan(deliver(items, *container), request.api)};
    }
    if (is(pick_verbs())) {
      if (any.empty()) return {Clarification{kWhichObject}};
      return {compress_plan(Plan{{Call{"pickup", {items.empty() ? any.front() : items.front()}}}}, request.api)};
    }
    if (is(goto_verbs())) {
      if (any.empty()) return {Clarification{kWhichObject}};
      return {Plan{{Call{"goto", {any.front()}}}}};
    }
    if (token == "open") return {Plan{{Call{"open_gripper", {}}}}};
    if (token == "close") return {Plan{{Call{"close_gripper", {}}}}};
    if (is(release_verbs())) return {Plan{{Call{"release", {}}}}};
  }
  return {Clarification{kWhichObject}};
}

}  // namespace

nlohmann::json response_to_json(const PlannerResponse& r) {
  nlohmann::json j;
  if (const auto* plan = r.plan()) {
    j = {{"outcome", "plan"}, {"plan", render_plan(*plan)}};
  } else if (const auto* c = r.clarification()) {
    j = {{"outcome", "clarification"}, {"text", c->text}};
  } else {
    j = {{"outcome", "done"}};
  }
  j["retry_count"] = r.retry_count;
  return j;
}

void BackendConfig::validate() const {
  if (kind == BackendKind::Remote && (endpoint.empty() || model.empty()))
    throw Error("InvalidConfig", "remote backend requires an endpoint and a model");
  if (max_retries < 0) throw Error("InvalidConfig", "max_retries must be non-negative");
}

BackendConfig BackendConfig::from_json(const nlohmann::json& json) {
  BackendConfig config;
  if (json.is_string()) {
    const auto kind = json.get<std::string>();
    if (kind == "remote")
      config.kind = BackendKind::Remote;
    else if (kind != "mock")
      throw Error("InvalidConfig", "unknown backend kind '" + kind + "'");
  } else if (json.is_object()) {
    const auto kind = json.value("kind", "mock");
    if (kind == "remote")
      config.kind = BackendKind::Remote;
    else if (kind != "mock")
      throw Error("InvalidConfig", "unknown backend kind '" + kind + "'");
    config.endpoint = json.value("endpoint", "");
    config.model = json.value("model", "");
    config.temperature = json.value("temperature", 0.0);
    config.max_retries = json.value("max_retries", 2);
  } else if (!json.is_null()) {
    throw Error("InvalidConfig", "backend must be a string or an object");
  }
  if (const char* key = std::getenv("PROVOX_API_KEY")) config.credential = key;
  config.validate();
  return config;
}

nlohmann::json BackendConfig::to_json() const {
  return {{"kind", kind == BackendKind::Remote ? "remote" : "mock"},
          {"endpoint", endpoint},
          {"model", model},
          {"temperature", temperature},
          {"max_retries", max_retries}};
}

PlannerResponse validate_response(const RawResponse& raw, const PlannerRequest& request) {
  switch (raw.kind) {
    case RawResponse::Kind::Malformed:
      throw Error("MalformedToolCall", raw.text);
    case RawResponse::Kind::Clarification:
      return {Clarification{raw.text}};
    case RawResponse::Kind::Done:
      return {GoalDone{}};
    case RawResponse::Kind::Source:
    case RawResponse::Kind::Calls:
      break;
  }
  Plan plan;
  if (raw.kind == RawResponse::Kind::Source) {
    plan = parse_plan(raw.text, request.api, request.objects);
  } else {
    for (const auto& c : raw.calls) plan.calls.push_back(Call{c.function, c.args});
    validate_plan(plan, request.api, request.objects);
  }
  if (plan.empty()) throw Error("MalformedToolCall", "the response contained no calls");
  if (plan.size() > kMaxPlanCalls)
    throw Error("PlanTooLong", "plans are limited to " + std::to_string(kMaxPlanCalls) + " calls");
  return {plan};
}

PlannerResponse validate_and_retry(RawResponse first, const PlannerRequest& request, const BackendConfig& config,
                                   const Regenerate& regenerate) {
  std::vector<std::string> corrections;
  RawResponse raw = std::move(first);
  for (int attempt = 0;; ++attempt) {
    try {
      PlannerResponse response = validate_response(raw, request);
      response.retry_count = attempt;
      return response;
    } catch (const Error& e) {
      if (attempt >= config.max_retries)
        throw Error("InvalidPlanAfterRetries",
                    "no valid plan after " + std::to_string(attempt + 1) + " attempt(s); last error " + e.code() +
                        ": " + e.what(),
                    {e.code()});
      corrections.push_back("Your previous answer was rejected (" + e.code() + ": " + e.what() +
                            "). Use only functions and objects from the API.");
      raw = regenerate(corrections);
    }
  }
}

PlannerResponse MockBackend::generate(const PlannerRequest& request) {
  PlannerResponse response = mock_generate(request);
  if (const auto* plan = response.plan()) {
    validate_plan(*plan, request.api, request.objects);
    if (plan->size() > kMaxPlanCalls) throw Error("InternalError", "mock produced an oversized plan");
  }
  return response;
}

TaskTargets extract_targets(std::string_view goal, const Api& api, const Catalog& objects) {
  TaskTargets targets;
  auto add_item = [&](const std::string& id) {
    if (std::find(targets.items.begin(), targets.items.end(), id) == targets.items.end()) targets.items.push_back(id);
  };
  auto is_container = [&](const std::string& id) {
    const auto* obj = objects.find(id);
    return obj != nullptr && obj->is_container;
  };

  for (const auto& m : text::mentioned_objects(goal, objects)) {
    if (m.object->is_container) {
      if (!targets.container) targets.container = m.object->id;
    } else {
      add_item(m.object->id);
    }
  }

  std::optional<std::string> api_container;
  for (const auto& def : api.taught()) {
    for (const auto& call : symbolic_expansion(def, api).calls) {
      if (call.args.empty() || is_placeholder(call.args.front()) || !objects.contains(call.args.front())) continue;
      const auto& id = call.args.front();
      if (call.function == "pickup" && !is_container(id)) add_item(id);
      if (call.function == "goto" && is_container(id) && !api_container) api_container = id;
    }
    for (const auto& m : text::mentioned_objects(def.signature.doc, objects)) {
      if (!m.object->is_container) add_item(m.object->id);
    }
  }

  if (!targets.container) targets.container = api_container;
  if (!targets.container) {
    std::vector<std::string> containers;
    for (const auto& o : objects.objects()) {
      if (o.is_container) containers.push_back(o.id);
    }
    if (containers.size() == 1) targets.container = containers.front();
  }
  return targets;
}

std::vector<std::string> delivered_items(const std::vector<InteractionStep>& history, const Api& api,
                                         const std::set<std::string>& containers) {
  std::vector<std::string> delivered;
  std::optional<std::string> held;
  std::optional<std::string> above;
  for (const auto& step : history) {
    if (step.kind != StepKind::Plan || !step.executed()) continue;
    Plan calls;
    try {
      calls = inline_plan(step.plan, api);
    } catch (const Error&) {
      continue;  // uses a function that has since been removed
    }
    std::size_t ran = calls.size();
    if (step.execution == ExecutionStatus::Faulted) ran = std::min(ran, step.events.empty() ? 0 : step.events.size() - 1);
    for (std::size_t i = 0; i < ran; ++i) {
      const Call& c = calls.calls[i];
      if (c.function == "pickup") {
        held = c.args.at(0);
        above = c.args.at(0);
      } else if (c.function == "goto") {
        above = c.args.at(0);
      } else if ((c.function == "release" || c.function == "open_gripper") && held) {
        if (above && containers.count(*above) &&
            std::find(delivered.begin(), delivered.end(), *held) == delivered.end())
          delivered.push_back(*held);
        held.reset();
      }
    }
  }
  return delivered;
}

std::vector<std::string> remaining_work(const PlannerRequest& request) {
  const auto targets = extract_targets(request.goal, request.api, request.objects);
  if (!targets.container) return {};
  const auto delivered = delivered_items(request.history, request.api, {*targets.container});
  std::vector<std::string> remaining;
  for (const auto& item : targets.items) {
    if (std::find(delivered.begin(), delivered.end(), item) == delivered.end()) remaining.push_back(item);
  }
  return remaining;
}

Plan compress_plan(const Plan& primitive_plan, const Api& api) {
  struct Pattern {
    const FunctionDef* def;
    Plan expansion;
  };
  std::vector<Pattern> patterns;
  const auto& entries = api.entries();
  for (const auto& def : entries) {
    if (!def.is_primitive()) patterns.push_back({&def, symbolic_expansion(def, api)});
  }

  Plan out;
  std::size_t at = 0;
  while (at < primitive_plan.size()) {
    const Pattern* best = nullptr;
    std::map<std::string, std::string> best_binding;
    for (const auto& p : patterns) {
      if (best && p.expansion.size() <= best->expansion.size()) continue;
      if (auto binding = unify_at(p.expansion, primitive_plan, at)) {
        best = &p;
        best_binding = std::move(*binding);
      }
    }
    if (best == nullptr || best->expansion.size() <= 1) {
      out.calls.push_back(primitive_plan.calls[at]);
      ++at;
      continue;
    }
    Call call{best->def->name(), {}};
    for (const auto& param : best->def->signature.params) call.args.push_back(best_binding.at("$" + param.name));
    out.calls.push_back(std::move(call));
    at += best->expansion.size();
  }
  return out;
}

PlannerResponse mock_generate(const PlannerRequest& request) {
  if (!request.is_proactive()) return interpret_utterance(request);

  const auto targets = extract_targets(request.goal, request.api, request.objects);
  const auto remaining = remaining_work(request);
  if (remaining.empty() || !targets.container) return {GoalDone{}};
  return {compress_plan(deliver({remaining.front()}, *targets.container), request.api)};
}

}  // namespace provox
