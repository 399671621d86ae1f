#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "provox/dsl.hpp"
#include "provox/history.hpp"

namespace provox {

inline constexpr std::string_view kNeutralGoal = "to help the user with a tabletop task";
inline constexpr std::size_t kMaxPlanCalls = 12;
inline constexpr std::size_t kHistoryWindow = 20;

struct UserUtterance {
  std::string text;
};

struct ProactiveTrigger {
  std::string text;
};

using PlannerInput = std::variant<UserUtterance, ProactiveTrigger>;

struct PlannerRequest {
  std::string goal;
  Api api;
  Catalog objects;
  std::vector<InteractionStep> history;
  PlannerInput input;

  bool is_proactive() const { return std::holds_alternative<ProactiveTrigger>(input); }
  const std::string& input_text() const;
};

struct Clarification {
  std::string text;
  bool operator==(const Clarification&) const = default;
};

struct GoalDone {
  bool operator==(const GoalDone&) const = default;
};

struct PlannerResponse {
  std::variant<Plan, Clarification, GoalDone> outcome;
  int retry_count = 0;
  // Seconds spent generating. Deterministic backends report 0.
  double latency = 0.0;

  const Plan* plan() const { return std::get_if<Plan>(&outcome); }
  const Clarification* clarification() const { return std::get_if<Clarification>(&outcome); }
  bool is_done() const { return std::holds_alternative<GoalDone>(outcome); }
};

nlohmann::json response_to_json(const PlannerResponse& response);

enum class BackendKind { Mock, Remote };

struct BackendConfig {
  BackendKind kind = BackendKind::Mock;
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_retries = 2;
  std::string credential;  // never serialized

  // Remote backends need an endpoint and a model (InvalidConfig otherwise).
  void validate() const;
  // Accepts "mock", "remote" or an object with the fields above. The
  // credential comes from PROVOX_API_KEY.
  static BackendConfig from_json(const nlohmann::json& json);
  nlohmann::json to_json() const;
};

// Byte-stable planner context: preamble, goal, API listing, history, input.
std::string assemble_prompt(const PlannerRequest& request);

// One function tool per API entry plus the synthetic submit_plan tool.
nlohmann::json derive_tool_schema(const Api& api, const Catalog& objects);

// Model output before validation.
struct RawCall {
  std::string function;
  std::vector<std::string> args;
};

struct RawResponse {
  enum class Kind { Calls, Source, Clarification, Done, Malformed };

  Kind kind = Kind::Calls;
  std::vector<RawCall> calls;
  std::string text;  // plan source, clarification, or the decode error

  static RawResponse from_calls(std::vector<RawCall> calls) { return {Kind::Calls, std::move(calls), {}}; }
  static RawResponse from_source(std::string source) { return {Kind::Source, {}, std::move(source)}; }
  static RawResponse clarify(std::string text) { return {Kind::Clarification, {}, std::move(text)}; }
  static RawResponse done() { return {Kind::Done, {}, {}}; }
  static RawResponse malformed(std::string why) { return {Kind::Malformed, {}, std::move(why)}; }
};

// Throws the first validation error (MalformedToolCall, SyntaxError,
// UnknownFunction, ArityMismatch, UnknownObject, PlanTooLong).
PlannerResponse validate_response(const RawResponse& raw, const PlannerRequest& request);

// Produces a fresh raw response given the corrective notes accumulated so far.
using Regenerate = std::function<RawResponse(const std::vector<std::string>& corrections)>;

// Re-asks up to config.max_retries times, appending each validation error as
// a correction. Throws InvalidPlanAfterRetries carrying the last error code.
PlannerResponse validate_and_retry(RawResponse first, const PlannerRequest& request, const BackendConfig& config,
                                   const Regenerate& regenerate);

class PlannerBackend {
 public:
  virtual ~PlannerBackend() = default;
  // Plan outcomes always validate against request.api. Errors:
  // BackendUnavailable, InvalidPlanAfterRetries.
  virtual PlannerResponse generate(const PlannerRequest& request) = 0;
  virtual std::string_view name() const = 0;
};

class MockBackend final : public PlannerBackend {
 public:
  PlannerResponse generate(const PlannerRequest& request) override;
  std::string_view name() const override { return "mock"; }
};

// Deterministic goal-directed stand-in for a language model.
PlannerResponse mock_generate(const PlannerRequest& request);

struct TaskTargets {
  std::vector<std::string> items;  // delivery order
  std::optional<std::string> container;
};

// Items come from the goal first, then from what the taught functions
// reveal (manipulated constants and objects named in their docs).
TaskTargets extract_targets(std::string_view goal, const Api& api, const Catalog& objects);

// Items put into one of `containers` by executed steps, in delivery order.
std::vector<std::string> delivered_items(const std::vector<InteractionStep>& history, const Api& api,
                                         const std::set<std::string>& containers);

std::vector<std::string> remaining_work(const PlannerRequest& request);

// Rewrites a primitive plan with taught functions where their inlining
// matches, greedily preferring the longest match.
Plan compress_plan(const Plan& primitive_plan, const Api& api);

}  // namespace provox
