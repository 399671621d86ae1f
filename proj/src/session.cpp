#include "provox/session.hpp"

#include <istream>
#include <numeric>
#include <ostream>

namespace provox {

std::string_view to_string(Mode mode) { return mode == Mode::Live ? "live" : "meta-prompting"; }

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::Idle:
      return "Idle";
    case SessionState::Planning:
      return "Planning";
    case SessionState::AwaitingConfirmation:
      return "AwaitingConfirmation";
    case SessionState::Executing:
      return "Executing";
    case SessionState::Teaching:
      return "Teaching";
    case SessionState::Done:
      return "Done";
  }
  return "Idle";
}

Mode mode_from_string(std::string_view text) {
  if (text == "live") return Mode::Live;
  if (text == "meta" || text == "meta-prompting") return Mode::MetaPrompting;
  throw Error("InvalidArgument", "unknown mode '" + std::string(text) + "'");
}

nlohmann::json pending_to_json(const PendingPlan& p) {
  nlohmann::json j = {{"plan", render_plan(p.plan)},
                      {"origin", std::string(to_string(p.origin))},
                      {"utterance", p.utterance ? nlohmann::json(*p.utterance) : nlohmann::json(nullptr)},
                      {"created_at", p.created_at}};
  if (p.suggestion) j["gloss"] = p.suggestion->gloss;
  return j;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"total_time", total_time},
          {"user_initiated", user_initiated},
          {"robot_initiated", robot_initiated},
          {"robot_initiated_accepted", robot_initiated_accepted},
          {"time_breakdown",
           {{"instructing", time_breakdown.instructing},
            {"executing", time_breakdown.executing},
            {"confirming", time_breakdown.confirming},
            {"idle", time_breakdown.idle}}}};
}

Session::Session(SceneSpec scene, Mode mode, std::unique_ptr<PlannerBackend> backend,
                 std::unique_ptr<NameDocProvider> namer, SessionOptions options, UserContext context)
    : sim_(std::move(scene)),
      objects_(sim_.scene().catalog()),
      mode_(mode),
      state_(SessionState::Idle),
      backend_(std::move(backend)),
      namer_(std::move(namer)),
      options_(options),
      context_(std::move(context)),
      world_(sim_.initial_state()) {
  if (!backend_) backend_ = std::make_unique<MockBackend>();
  if (!namer_) namer_ = std::make_unique<HeuristicNamer>();
  for (const auto& def : context_.api.taught()) validate_body_objects(def, objects_);
  if (mode_ == Mode::Live) live_start_context_ = context_;
}

void Session::require_mode(Mode mode, const char* op) const {
  if (mode_ != mode)
    throw Error("WrongState", std::string(op) + " needs " + std::string(to_string(mode)) + " mode; the session is in " +
                                  std::string(to_string(mode_)) + " mode");
}

void Session::require_state(SessionState state, const char* op) const {
  if (state_ != state)
    throw Error("WrongState", std::string(op) + " needs state " + std::string(to_string(state)) + "; the session is " +
                                  std::string(to_string(state_)));
}

void Session::emit(std::string type, nlohmann::json payload) {
  if (observer_) observer_(SessionEvent{std::move(type), std::move(payload)});
}

void Session::set_state(SessionState state) {
  if (state == state_) return;
  const auto from = state_;
  state_ = state;
  nlohmann::json payload = {{"from", std::string(to_string(from))}, {"to", std::string(to_string(state))}};
  if (pending_) payload["pending"] = pending_to_json(*pending_);
  emit("state_changed", std::move(payload));
}

void Session::message(const std::string& kind, const std::string& text) {
  emit("message", {{"kind", kind}, {"text", text}});
}

void Session::advance(double TimeBreakdown::*bucket, double seconds) {
  time_.*bucket += seconds;
  clock_ += seconds;
}

InteractionStep& Session::append(InteractionStep step) {
  step.index = history_.size();
  check_step(step);
  history_.push_back(std::move(step));
  step_hashes_.push_back(world_hash(world_));
  if (transcript_sink_ != nullptr) {
    *transcript_sink_ << nlohmann::json{{"kind", "step"},
                                        {"step", step_to_json(history_.back())},
                                        {"world_hash", step_hashes_.back()}}
                             .dump()
                      << '\n'
                      << std::flush;
  }
  return history_.back();
}

UtteranceResult Session::handle_utterance(const std::string& text) {
  require_mode(Mode::Live, "handle_utterance");
  require_state(SessionState::Idle, "handle_utterance");
  const double started = clock_;
  set_state(SessionState::Planning);
  PlannerRequest request{context_.goal, context_.api, objects_, history_, UserUtterance{text}};
  PlannerResponse response;
  try {
    response = backend_->generate(request);
  } catch (const Error& e) {
    advance(&TimeBreakdown::instructing, options_.instruct_cost);
    const std::string text_out = e.code() + ": " + e.what();
    message("error", text_out);
    set_state(SessionState::Idle);
    return {std::nullopt, text_out};
  }
  advance(&TimeBreakdown::instructing, options_.instruct_cost + response.latency);

  if (const auto* plan = response.plan()) {
    pending_ = PendingPlan{*plan, Initiator::User, text, std::nullopt, started};
    set_state(SessionState::AwaitingConfirmation);
    if (options_.auto_confirm_user_plans) execute_pending(Confirmation::NotRequired);
    return {*plan, std::nullopt};
  }
  const std::string reply = response.clarification() ? response.clarification()->text : "There is nothing left to do.";
  message(response.clarification() ? "clarification" : "info", reply);
  set_state(SessionState::Idle);
  return {std::nullopt, reply};
}

void Session::confirm() {
  require_mode(Mode::Live, "confirm");
  require_state(SessionState::AwaitingConfirmation, "confirm");
  advance(&TimeBreakdown::confirming, options_.confirm_cost);
  execute_pending(Confirmation::Confirmed);
}

void Session::reject() {
  require_mode(Mode::Live, "reject");
  require_state(SessionState::AwaitingConfirmation, "reject");
  advance(&TimeBreakdown::confirming, options_.confirm_cost);
  InteractionStep step;
  step.initiator = pending_->origin;
  step.utterance = pending_->utterance;
  step.plan = pending_->plan;
  step.confirmation = Confirmation::Rejected;
  step.execution = ExecutionStatus::Skipped;
  step.t_start = pending_->created_at;
  step.t_end = clock_;
  pending_.reset();
  append(std::move(step));
  set_state(SessionState::Idle);
}

void Session::execute_pending(Confirmation confirmation) {
  PendingPlan pending = std::move(*pending_);
  pending_.reset();
  set_state(SessionState::Executing);

  const PlanResult result = sim_.exec_plan(world_, pending.plan, context_.api);
  double duration = 0.0;
  for (const auto& e : result.events) {
    duration += e.duration;
    emit("execution_event", {{"step", history_.size()}, {"event", event_to_json(e)}});
  }
  advance(&TimeBreakdown::executing, duration);
  world_ = result.world;

  InteractionStep step;
  step.initiator = pending.origin;
  step.utterance = pending.utterance;
  step.plan = pending.plan;
  step.confirmation = confirmation;
  step.execution = result.faulted() ? ExecutionStatus::Faulted : ExecutionStatus::Completed;
  step.events = result.events;
  step.t_start = pending.created_at;
  step.t_end = clock_;
  append(std::move(step));

  if (result.faulted()) {
    const auto& fault = result.events.back();
    message("fault", fault.fault + (fault.detail.empty() ? "" : ": " + fault.detail));
    set_state(SessionState::Idle);
    return;
  }
  set_state(SessionState::Idle);
  if (options_.proactive) fire_proactive();
}

void Session::fire_proactive() {
  const SessionState previous = state_;
  set_state(SessionState::Planning);
  SuggestResult result;
  try {
    result = suggest_next(context_, objects_, history_, *backend_, clock_);
  } catch (...) {
    set_state(previous);
    throw;
  }
  advance(&TimeBreakdown::idle, result.latency);
  if (result.suggestion) {
    pending_ = PendingPlan{result.suggestion->plan, Initiator::RobotProactive, std::nullopt, result.suggestion, clock_};
    emit("suggestion", suggestion_to_json(*result.suggestion));
    set_state(SessionState::AwaitingConfirmation);
    return;
  }
  if (result.goal_done) {
    message("info", "The goal looks complete.");
    set_state(SessionState::Done);
    return;
  }
  if (!result.note.empty()) message("clarification", result.note);
  set_state(SessionState::Idle);
}

bool Session::request_suggestion() {
  require_mode(Mode::Live, "request_suggestion");
  require_state(SessionState::Idle, "request_suggestion");
  fire_proactive();
  return pending_.has_value();
}

FunctionDef Session::teach_live(const TeachExample& example) {
  require_mode(Mode::Live, "teach_live");
  if (state_ == SessionState::Planning || state_ == SessionState::Executing || state_ == SessionState::Teaching)
    throw Error("WrongState", "cannot teach while " + std::string(to_string(state_)));
  const SessionState previous = state_;
  set_state(SessionState::Teaching);
  FunctionDef def;
  try {
    def = synthesize_function(example, context_.api, objects_, *namer_, options_.lift);
    context_.api = register_function(context_.api, def);
  } catch (...) {
    set_state(previous);
    throw;
  }
  const double started = clock_;
  advance(&TimeBreakdown::instructing, options_.instruct_cost);
  InteractionStep step;
  step.kind = StepKind::Teaching;
  step.initiator = Initiator::User;
  step.utterance = example.trigger_utterance;
  step.plan = example.decomposition;
  step.confirmation = Confirmation::NotRequired;
  step.execution = ExecutionStatus::Skipped;
  step.t_start = started;
  step.t_end = clock_;
  step.taught = def;
  append(std::move(step));
  message("info", "Learned " + def.name() + ".");
  set_state(previous);
  return def;
}

void Session::wait(double seconds) {
  require_mode(Mode::Live, "wait");
  if (!(seconds >= 0.0)) throw Error("InvalidArgument", "wait needs a non-negative duration");
  advance(&TimeBreakdown::idle, seconds);
}

void Session::end() {
  require_mode(Mode::Live, "end");
  if (state_ == SessionState::Done) return;
  if (pending_) {
    InteractionStep step;
    step.initiator = pending_->origin;
    step.utterance = pending_->utterance;
    step.plan = pending_->plan;
    step.confirmation = Confirmation::Rejected;
    step.execution = ExecutionStatus::Skipped;
    step.t_start = pending_->created_at;
    step.t_end = clock_;
    pending_.reset();
    append(std::move(step));
  }
  set_state(SessionState::Done);
}

void Session::meta_set_goal(const std::string& text) {
  require_mode(Mode::MetaPrompting, "meta_set_goal");
  context_.goal = text;
  emit("message", {{"kind", "info"}, {"text", "Goal updated."}});
}

FunctionDef Session::meta_teach(const TeachForm& form) {
  require_mode(Mode::MetaPrompting, "meta_teach");
  FunctionDef def = synthesize_from_form(form, context_.api, objects_);
  context_.api = register_function(context_.api, def);
  message("info", "Learned " + def.name() + ".");
  return def;
}

FunctionDef Session::meta_edit(const std::string& name, const TeachForm& form) {
  require_mode(Mode::MetaPrompting, "meta_edit");
  FunctionDef def = form_to_def(form, objects_);
  context_.api = update_function(context_.api, name, def);
  message("info", "Updated " + def.name() + ".");
  return def;
}

void Session::meta_delete(const std::string& name) {
  require_mode(Mode::MetaPrompting, "meta_delete");
  context_.api = remove_function(context_.api, name);
  message("info", "Deleted " + name + ".");
}

PlannerResponse Session::meta_test_utterance(const std::string& text) {
  require_mode(Mode::MetaPrompting, "meta_test_utterance");
  PlannerRequest request{context_.goal, context_.api, objects_, {}, UserUtterance{text}};
  return backend_->generate(request);
}

void Session::enter_live() {
  require_mode(Mode::MetaPrompting, "enter_live");
  mode_ = Mode::Live;
  live_start_context_ = context_;
  emit("state_changed", {{"from", std::string(to_string(state_))},
                         {"to", std::string(to_string(state_))},
                         {"mode", std::string(to_string(mode_))}});
  if (transcript_sink_ != nullptr) *transcript_sink_ << transcript_header().dump() << '\n' << std::flush;
}

MetricsReport Session::metrics() const {
  MetricsReport report;
  for (const auto& step : history_) {
    if (step.kind != StepKind::Plan) continue;
    if (step.initiator == Initiator::User) {
      ++report.user_initiated;
    } else {
      ++report.robot_initiated;
      if (step.confirmation == Confirmation::Confirmed) ++report.robot_initiated_accepted;
    }
  }
  report.time_breakdown = time_;
  report.total_time = time_.instructing + time_.executing + time_.confirming + time_.idle;
  return report;
}

nlohmann::json Session::snapshot() const {
  nlohmann::json api = nlohmann::json::array();
  for (const auto& def : context_.api.entries()) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : def.signature.params) params.push_back(p.name);
    api.push_back({{"name", def.name()},
                   {"params", params},
                   {"doc", def.signature.doc},
                   {"provenance", std::string(to_string(def.signature.provenance))},
                   {"body", def.body ? nlohmann::json(render_body(*def.body)) : nlohmann::json(nullptr)}});
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& step : history_) history.push_back(step_to_json(step));
  return {{"state", std::string(to_string(state_))},
          {"mode", std::string(to_string(mode_))},
          {"goal", context_.goal},
          {"api", api},
          {"objects", scene_to_json(sim_.scene()).at("objects")},
          {"world", world_to_json(world_)},
          {"world_hash", world_hash(world_)},
          {"history", history},
          {"pending", pending_ ? pending_to_json(*pending_) : nlohmann::json(nullptr)},
          {"proactive", options_.proactive},
          {"clock", clock_},
          {"metrics", metrics().to_json()}};
}

nlohmann::json Session::transcript_header() const {
  nlohmann::json header = context_to_json(live_start_context_);
  header["kind"] = "context";
  header["scene"] = sim_.scene().name;
  header["initial_hash"] = world_hash(sim_.initial_state());
  return header;
}

std::vector<nlohmann::json> Session::transcript() const {
  std::vector<nlohmann::json> lines{transcript_header()};
  for (std::size_t i = 0; i < history_.size(); ++i) {
    lines.push_back({{"kind", "step"}, {"step", step_to_json(history_[i])}, {"world_hash", step_hashes_[i]}});
  }
  return lines;
}

void Session::write_transcript(std::ostream& out) const {
  for (const auto& line : transcript()) out << line.dump() << '\n';
}

void Session::set_transcript_sink(std::ostream* out) {
  transcript_sink_ = out;
  if (out == nullptr) return;
  if (mode_ == Mode::Live) {
    for (const auto& line : transcript()) *out << line.dump() << '\n';
    *out << std::flush;
  }
}

std::vector<nlohmann::json> read_transcript(std::istream& in) {
  std::vector<nlohmann::json> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto json = nlohmann::json::parse(line, nullptr, false);
    if (json.is_discarded()) throw Error("SchemaError", "transcript line " + std::to_string(number) + " is not JSON");
    lines.push_back(std::move(json));
  }
  return lines;
}

ReplayResult replay_transcript(const std::vector<nlohmann::json>& lines, const SceneSpec& scene) {
  if (lines.empty() || lines.front().value("kind", "") != "context")
    throw Error("SchemaError", "a transcript starts with a context line");
  const Simulator sim(scene);
  const Catalog objects = scene.catalog();
  Api api = context_from_json(lines.front(), &objects).api;
  ReplayResult result{sim.initial_state(), {}, 0};
  const auto expected_initial = lines.front().value("initial_hash", "");
  if (!expected_initial.empty() && expected_initial != world_hash(result.world))
    throw Error("ReplayMismatch", "the transcript was recorded against a different scene");

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const InteractionStep step = step_from_json(line.at("step"));
    if (step.kind == StepKind::Teaching) {
      api = register_function(api, *step.taught);
    } else if (step.executed()) {
      const PlanResult run = sim.exec_plan(result.world, step.plan, api);
      if (run.faulted() != (step.execution == ExecutionStatus::Faulted))
        throw Error("ReplayMismatch", "step " + std::to_string(step.index) + " changed its outcome");
      result.world = run.world;
    }
    const auto hash = world_hash(result.world);
    if (hash != line.value("world_hash", hash))
      throw Error("ReplayMismatch", "world hash diverged at step " + std::to_string(step.index));
    ++result.steps;
  }
  result.final_hash = world_hash(result.world);
  return result;
}

}  // namespace provox
