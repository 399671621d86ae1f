#include "provox/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

namespace provox {

namespace {

std::map<std::string, std::size_t> call_counts(const Plan& plan) {
  std::map<std::string, std::size_t> counts;
  for (const auto& c : plan.calls) ++counts[render_call(c)];
  return counts;
}

// Primitive calls of a step that ran to completion.
Plan executed_calls(const InteractionStep& step, const Api& api) {
  Plan inlined = inline_plan(step.plan, api);
  std::size_t ran = 0;
  for (const auto& e : step.events) {
    if (!e.is_fault()) ++ran;
  }
  inlined.calls.resize(std::min(ran, inlined.calls.size()));
  return inlined;
}

std::string fixed(double v, int precision) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << v;
  return out.str();
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string_view to_string(EvalCondition condition) {
  switch (condition) {
    case EvalCondition::Full:
      return "full";
    case EvalCondition::FixedGoal:
      return "fixed-goal";
    case EvalCondition::FixedApi:
      return "fixed-api";
    case EvalCondition::FixedContext:
      return "fixed-context";
  }
  return "full";
}

EvalCondition condition_from_string(std::string_view text) {
  for (auto c : kAllConditions) {
    if (to_string(c) == text) return c;
  }
  throw Error("InvalidArgument", "unknown condition '" + std::string(text) + "'");
}

std::vector<EvalCondition> parse_conditions(std::string_view text) {
  std::vector<EvalCondition> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    auto item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.push_back(condition_from_string(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw Error("InvalidArgument", "no conditions given");
  return out;
}

UserContext make_condition_context(const UserContext& user_context, EvalCondition condition) {
  UserContext out = user_context;
  if (condition == EvalCondition::FixedGoal || condition == EvalCondition::FixedContext)
    out.goal = std::string(kNeutralGoal);
  if (condition == EvalCondition::FixedApi || condition == EvalCondition::FixedContext) out.api = Api();
  return out;
}

Rollout run_proactive_rollout(const UserContext& context, const SceneSpec& scene, PlannerBackend& backend,
                              std::size_t step_cap) {
  if (step_cap == 0) throw Error("InvalidArgument", "a rollout needs a step cap of at least 1");

  // The session owns its backend, so hand it a forwarding shim.
  struct Borrowed final : PlannerBackend {
    PlannerBackend& inner;
    explicit Borrowed(PlannerBackend& b) : inner(b) {}
    PlannerResponse generate(const PlannerRequest& r) override { return inner.generate(r); }
    std::string_view name() const override { return inner.name(); }
  };

  SessionOptions options;
  options.proactive = true;
  Session session(scene, Mode::Live, std::make_unique<Borrowed>(backend), nullptr, options, context);

  Rollout rollout;
  session.request_suggestion();
  while (session.pending() && rollout.steps_taken < step_cap) {
    session.confirm();
    ++rollout.steps_taken;
    if (session.history().back().execution == ExecutionStatus::Faulted) break;
  }
  for (const auto& step : session.history()) {
    if (step.kind == StepKind::Plan && step.executed()) {
      for (auto& c : executed_calls(step, session.api()).calls) rollout.trace.calls.push_back(std::move(c));
    }
  }
  if (!session.history().empty() && session.history().back().execution == ExecutionStatus::Faulted)
    rollout.stop_reason = "fault";
  else if (session.state() == SessionState::Done)
    rollout.stop_reason = "done";
  else if (session.pending())
    rollout.stop_reason = "step-cap";
  else
    rollout.stop_reason = "no-suggestion";
  return rollout;
}

std::size_t efficacy_overlap(const Plan& trace, const Plan& reference) {
  const auto a = call_counts(trace);
  const auto b = call_counts(reference);
  std::size_t total = 0;
  for (const auto& [call, n] : a) {
    const auto it = b.find(call);
    if (it != b.end()) total += std::min(n, it->second);
  }
  return total;
}

std::size_t lcs_overlap(const Plan& trace, const Plan& reference) {
  const auto& x = trace.calls;
  const auto& y = reference.calls;
  std::vector<std::size_t> prev(y.size() + 1, 0);
  std::vector<std::size_t> cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j)
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

Plan reference_from_json(const nlohmann::json& json, const Catalog& objects) {
  const auto& calls = json.is_object() ? json.at("calls") : json;
  std::string source;
  if (calls.is_string()) {
    source = calls.get<std::string>();
  } else if (calls.is_array()) {
    for (const auto& c : calls) source += c.get<std::string>() + ";";
  } else {
    throw Error("SchemaError", "reference calls must be a string or a list of strings");
  }
  const Api base;
  Plan plan = parse_plan(source, base, objects);
  if (plan.empty()) throw Error("SchemaError", "the reference plan is empty");
  return plan;
}

Plan load_reference_file(const std::filesystem::path& path, const Catalog& objects) {
  std::ifstream in(path);
  if (!in) throw Error("NotFound", "cannot open reference file " + path.string());
  auto json = nlohmann::json::parse(in, nullptr, false);
  if (json.is_discarded()) throw Error("SchemaError", path.string() + " is not valid JSON");
  return reference_from_json(json, objects);
}

std::vector<NamedContext> load_context_dir(const std::filesystem::path& dir, const Catalog& objects) {
  if (!std::filesystem::is_directory(dir)) throw Error("NotFound", dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedContext> out;
  for (const auto& f : files) out.push_back({f.stem().string(), load_context_file(f, &objects)});
  return out;
}

const EfficacyResult* StudyReport::find(std::string_view context, EvalCondition condition) const {
  for (const auto& r : results) {
    if (r.context == context && r.condition == condition) return &r;
  }
  return nullptr;
}

nlohmann::json StudyReport::to_json() const {
  nlohmann::json results_json = nlohmann::json::array();
  for (const auto& r : results) {
    results_json.push_back({{"context", r.context},
                            {"condition", std::string(to_string(r.condition))},
                            {"helpful_actions", r.helpful_actions},
                            {"lcs", r.lcs},
                            {"steps_taken", r.steps_taken},
                            {"stop_reason", r.stop_reason},
                            {"rollout", render_plan(r.rollout)}});
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : summaries) {
    summary.push_back({{"condition", std::string(to_string(s.condition))},
                       {"n", s.n},
                       {"mean", s.mean},
                       {"standard_error", s.standard_error},
                       {"mean_lcs", s.mean_lcs}});
  }
  return {{"metadata",
           {{"reference_size", reference_size},
            {"step_cap", step_cap},
            {"backend", backend},
            {"suggestions", "auto-accepted"},
            {"overlap", "multiset intersection of grounded primitive calls"},
            {"secondary", "longest common subsequence"}}},
          {"summary", summary},
          {"results", results_json}};
}

std::string StudyReport::to_table() const {
  std::ostringstream out;
  out << pad("condition", 16) << pad("n", 5) << pad("helpful (mean ± se)", 22) << "lcs (mean)\n";
  for (const auto& s : summaries) {
    out << pad(std::string(to_string(s.condition)), 16) << pad(std::to_string(s.n), 5)
        << pad(fixed(s.mean, 2) + " ± " + fixed(s.standard_error, 2), 23) << fixed(s.mean_lcs, 2) << "\n";
  }
  out << "reference: " << reference_size << " calls, step cap " << step_cap << ", backend " << backend << "\n";
  return out.str();
}

StudyReport run_study(const std::vector<NamedContext>& contexts, const Plan& reference, const SceneSpec& scene,
                      PlannerBackend& backend, const std::vector<EvalCondition>& conditions) {
  StudyReport report;
  report.reference_size = reference.size();
  report.step_cap = reference.size() + 2;
  report.backend = std::string(backend.name());
  if (contexts.empty()) return report;

  for (auto condition : conditions) {
    ConditionSummary summary;
    summary.condition = condition;
    std::vector<double> values;
    double lcs_total = 0.0;
    for (const auto& named : contexts) {
      const auto rollout =
          run_proactive_rollout(make_condition_context(named.context, condition), scene, backend, report.step_cap);
      EfficacyResult r{named.name,
                       condition,
                       efficacy_overlap(rollout.trace, reference),
                       lcs_overlap(rollout.trace, reference),
                       rollout.trace,
                       rollout.steps_taken,
                       rollout.stop_reason};
      spdlog::debug("{} / {}: {} helpful actions", named.name, to_string(condition), r.helpful_actions);
      values.push_back(static_cast<double>(r.helpful_actions));
      lcs_total += static_cast<double>(r.lcs);
      report.results.push_back(std::move(r));
    }
    summary.n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    summary.mean = sum / static_cast<double>(summary.n);
    summary.mean_lcs = lcs_total / static_cast<double>(summary.n);
    if (summary.n > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - summary.mean) * (v - summary.mean);
      summary.standard_error = std::sqrt(ss / static_cast<double>(summary.n - 1)) / std::sqrt(static_cast<double>(summary.n));
    }
    report.summaries.push_back(summary);
  }
  return report;
}

ScriptedUserRun run_scripted_user(const UserContext& context, const SceneSpec& scene,
                                  const std::vector<std::string>& items, const std::string& container,
                                  bool proactive, double side_task_seconds) {
  SessionOptions options;
  options.proactive = proactive;
  Session session(scene, Mode::Live, std::make_unique<MockBackend>(), nullptr, options, context);
  const Catalog& objects = session.objects();
  const auto* bag = objects.find(container);
  if (bag == nullptr) throw Error("UnknownObject", "unknown container " + container, {container});

  auto remaining = [&] {
    std::vector<std::string> out;
    for (const auto& item : items) {
      if (!session.world().is_inside(item, container)) out.push_back(item);
    }
    return out;
  };
  auto instruct = [&](const std::string& item) {
    const auto* obj = objects.find(item);
    if (obj == nullptr) throw Error("UnknownObject", "unknown item " + item, {item});
    const auto result = session.handle_utterance("put the " + obj->display_name + " in the " + bag->display_name);
    if (session.state() == SessionState::AwaitingConfirmation) session.confirm();
    return result.plan.has_value();
  };
  auto wanted = [&](const Plan& plan) {
    const auto left = remaining();
    bool any = false;
    for (const auto& c : inline_plan(plan, session.api()).calls) {
      if (c.function != "pickup") continue;
      if (std::find(left.begin(), left.end(), c.args.at(0)) == left.end()) return false;
      any = true;
    }
    return any;
  };

  bool side_task_done = false;
  const std::size_t max_rounds = 4 * items.size() + 4;
  for (std::size_t round = 0; round < max_rounds && session.state() != SessionState::Done; ++round) {
    if (session.pending()) {
      if (session.pending()->origin == Initiator::RobotProactive && wanted(session.pending()->plan))
        session.confirm();
      else
        session.reject();
    } else {
      const auto left = remaining();
      if (left.empty()) break;
      if (!instruct(left.front())) break;
    }
    if (!side_task_done && !session.history().empty()) {
      session.wait(side_task_seconds);
      side_task_done = true;
    }
  }
  if (session.state() != SessionState::Done) session.end();
  return {session.metrics(), session.history(), session.world()};
}

}  // namespace provox
