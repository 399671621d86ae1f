#pragma once

// Interaction state machine.
//
//   Idle --utterance/trigger--> Planning --plan--> AwaitingConfirmation
//   Planning --clarification/none--> Idle
//   AwaitingConfirmation --confirm--> Executing --> Idle (suggestion may follow)
//   AwaitingConfirmation --reject--> Idle
//   any --teach--> Teaching --> previous
//   Idle/AwaitingConfirmation --done/end--> Done
//
// A session is single-writer; callers serialize access themselves.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provox/context.hpp"
#include "provox/history.hpp"
#include "provox/planner.hpp"
#include "provox/proactive.hpp"
#include "provox/sim.hpp"
#include "provox/synthesis.hpp"

namespace provox {

enum class Mode { MetaPrompting, Live };
enum class SessionState { Idle, Planning, AwaitingConfirmation, Executing, Teaching, Done };

std::string_view to_string(Mode mode);
std::string_view to_string(SessionState state);
Mode mode_from_string(std::string_view text);

struct SessionOptions {
  bool proactive = true;
  bool auto_confirm_user_plans = false;
  double instruct_cost = 8.0;  // simulated seconds per utterance
  double confirm_cost = 2.0;   // simulated seconds per gate
  LiftPolicy lift = LiftPolicy::Manipulated;
};

// A plan waiting at the gate, from either side.
struct PendingPlan {
  Plan plan;
  Initiator origin = Initiator::User;
  std::optional<std::string> utterance;
  std::optional<Suggestion> suggestion;  // robot-initiated only
  double created_at = 0.0;
};

nlohmann::json pending_to_json(const PendingPlan& pending);

struct TimeBreakdown {
  double instructing = 0.0;
  double executing = 0.0;
  double confirming = 0.0;
  double idle = 0.0;
};

struct MetricsReport {
  double total_time = 0.0;
  std::size_t user_initiated = 0;
  std::size_t robot_initiated = 0;
  std::size_t robot_initiated_accepted = 0;
  TimeBreakdown time_breakdown;

  std::size_t total_plans() const { return user_initiated + robot_initiated; }
  nlohmann::json to_json() const;
};

struct SessionEvent {
  std::string type;  // state_changed | suggestion | execution_event | message
  nlohmann::json payload;
};

using EventObserver = std::function<void(const SessionEvent&)>;

struct UtteranceResult {
  std::optional<Plan> plan;           // pending (or already executed when auto-confirmed)
  std::optional<std::string> message;  // clarification or surfaced backend error
};

class Session {
 public:
  Session(SceneSpec scene, Mode mode, std::unique_ptr<PlannerBackend> backend,
          std::unique_ptr<NameDocProvider> namer, SessionOptions options = {}, UserContext context = {});

  // Read side.
  Mode mode() const { return mode_; }
  SessionState state() const { return state_; }
  const std::string& goal() const { return context_.goal; }
  const Api& api() const { return context_.api; }
  const UserContext& context() const { return context_; }
  const Catalog& objects() const { return objects_; }
  const SceneSpec& scene() const { return sim_.scene(); }
  const WorldState& world() const { return world_; }
  const std::vector<InteractionStep>& history() const { return history_; }
  const std::optional<PendingPlan>& pending() const { return pending_; }
  const SessionOptions& options() const { return options_; }
  double clock() const { return clock_; }
  MetricsReport metrics() const;
  nlohmann::json snapshot() const;

  void set_observer(EventObserver observer) { observer_ = std::move(observer); }

  // Live mode.
  UtteranceResult handle_utterance(const std::string& text);
  void confirm();
  void reject();
  // Asks for a suggestion without a preceding execution (used to start
  // rollouts). Returns whether one is now pending.
  bool request_suggestion();
  FunctionDef teach_live(const TeachExample& example);
  // Human time spent elsewhere (e.g. making sandwiches).
  void wait(double seconds);
  void end();

  // Meta-prompting mode. None of these touch the world or the history.
  void meta_set_goal(const std::string& text);
  FunctionDef meta_teach(const TeachForm& form);
  FunctionDef meta_edit(const std::string& name, const TeachForm& form);
  void meta_delete(const std::string& name);
  PlannerResponse meta_test_utterance(const std::string& text);
  // One-way switch to live collaboration.
  void enter_live();

  nlohmann::json export_context() const { return context_to_json(context_); }

  // JSON lines: a context header, then one line per step with the world hash
  // after it.
  std::vector<nlohmann::json> transcript() const;
  void write_transcript(std::ostream& out) const;
  // Streams each line as it is produced (the header is written immediately).
  void set_transcript_sink(std::ostream* out);

 private:
  void require_mode(Mode mode, const char* op) const;
  void require_state(SessionState state, const char* op) const;
  void set_state(SessionState state);
  void emit(std::string type, nlohmann::json payload);
  void message(const std::string& kind, const std::string& text);
  void advance(double TimeBreakdown::*bucket, double seconds);
  InteractionStep& append(InteractionStep step);
  void execute_pending(Confirmation confirmation);
  void fire_proactive();
  nlohmann::json transcript_header() const;

  Simulator sim_;
  Catalog objects_;
  Mode mode_;
  SessionState state_;
  std::unique_ptr<PlannerBackend> backend_;
  std::unique_ptr<NameDocProvider> namer_;
  SessionOptions options_;
  UserContext context_;
  UserContext live_start_context_;
  WorldState world_;
  std::vector<InteractionStep> history_;
  std::vector<std::string> step_hashes_;
  std::optional<PendingPlan> pending_;
  TimeBreakdown time_;
  double clock_ = 0.0;
  EventObserver observer_;
  std::ostream* transcript_sink_ = nullptr;
};

struct ReplayResult {
  WorldState world;
  std::string final_hash;
  std::size_t steps = 0;
};

// Re-runs every executed step from the scene's initial world. Throws
// Error("ReplayMismatch") at the first step whose world hash differs.
ReplayResult replay_transcript(const std::vector<nlohmann::json>& lines, const SceneSpec& scene);
std::vector<nlohmann::json> read_transcript(std::istream& in);

}  // namespace provox
