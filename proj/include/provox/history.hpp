#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provox/dsl.hpp"
#include "provox/sim.hpp"

namespace provox {

enum class Initiator { User, RobotProactive };
enum class Confirmation { NotRequired, Confirmed, Rejected };
enum class ExecutionStatus { Pending, Completed, Faulted, Skipped };
enum class StepKind { Plan, Teaching };

std::string_view to_string(Initiator v);
std::string_view to_string(Confirmation v);
std::string_view to_string(ExecutionStatus v);
std::string_view to_string(StepKind v);

// One (utterance, plan) exchange. Teaching steps record a live-taught
// function; they carry the decomposition as their plan and never execute.
struct InteractionStep {
  std::size_t index = 0;
  StepKind kind = StepKind::Plan;
  Initiator initiator = Initiator::User;
  std::optional<std::string> utterance;
  Plan plan;
  Confirmation confirmation = Confirmation::NotRequired;
  ExecutionStatus execution = ExecutionStatus::Pending;
  std::vector<SimEvent> events;
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<FunctionDef> taught;

  bool executed() const {
    return execution == ExecutionStatus::Completed || execution == ExecutionStatus::Faulted;
  }
  bool operator==(const InteractionStep&) const = default;
};

// Throws Error("InvalidStep") when the step breaks its own invariants.
void check_step(const InteractionStep& step);

nlohmann::json step_to_json(const InteractionStep& step);
InteractionStep step_from_json(const nlohmann::json& json);

}  // namespace provox
