#pragma once

// Randomized property checks shared by the unit suite and the acceptance
// runner. Each returns a tally instead of asserting so both callers can
// report it their own way.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "provox/context.hpp"
#include "provox/dsl.hpp"
#include "provox/session.hpp"
#include "provox/sim.hpp"
#include "support.hpp"

namespace provox::testing {

struct PropertyTally {
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::vector<std::string> messages;

  void fail(const std::string& what) {
    ++failures;
    if (messages.size() < 10) messages.push_back(what);
  }
  bool ok() const { return failures == 0; }
  std::string summary() const {
    std::string s = std::to_string(cases) + " cases, " + std::to_string(failures) + " failures";
    for (const auto& m : messages) s += "\n  " + m;
    return s;
  }
};

class Rng {
 public:
  explicit Rng(unsigned seed) : engine_(seed) {}
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(engine_); }
  std::mt19937& engine() { return engine_; }

 private:
  std::mt19937 engine_;
};

inline FunctionDef taught_def(const std::string& name, std::vector<std::string> params, const std::string& body) {
  FunctionDef def;
  def.signature.name = name;
  for (auto& p : params) def.signature.params.push_back(ParamSpec{std::move(p), ParamKind::ObjectRef, ""});
  def.body = parse_body(body);
  return def;
}

// parse(render(p)) == p for random plans over an API with nested functions.
inline PropertyTally round_trip_property(std::size_t count, unsigned seed) {
  PropertyTally tally;
  Rng rng(seed);
  std::vector<ObjectRef> objs;
  for (int i = 0; i < 8; ++i) objs.push_back(ObjectRef{"OBJ_" + std::to_string(i), "object", {"object"}, false, {}});
  const Catalog objects(objs);
  Api api;
  api = register_function(api, taught_def("pack", {"obj"}, "pickup($obj); goto(OBJ_0); release()"));
  api = register_function(api, taught_def("swap", {"a", "b"}, "pack($a); pack($b)"));
  api = register_function(api, taught_def("tidy", {}, "open_gripper(); close_gripper()"));

  for (std::size_t n = 0; n < count; ++n) {
    Plan plan;
    const std::size_t len = rng.pick(11);
    for (std::size_t i = 0; i < len; ++i) {
      const auto& def = api.entries()[rng.pick(api.entries().size())];
      Call call{def.name(), {}};
      for (std::size_t a = 0; a < def.signature.arity(); ++a) call.args.push_back(objs[rng.pick(objs.size())].id);
      plan.calls.push_back(call);
    }
    ++tally.cases;
    try {
      if (!(parse_plan(render_plan(plan), api, objects) == plan)) tally.fail("round trip changed " + render_plan(plan));
    } catch (const Error& e) {
      tally.fail(render_plan(plan) + " -> " + e.code());
    }
  }
  return tally;
}

// Independent oracle: textual expansion over a name -> (params, body) table.
struct OracleFn {
  std::vector<std::string> params;
  std::vector<std::pair<std::string, std::vector<std::string>>> body;  // "$p" marks parameters
};

inline void oracle_expand(const std::map<std::string, OracleFn>& table, const std::string& fn,
                          const std::vector<std::string>& args, std::vector<std::string>& out) {
  const auto it = table.find(fn);
  if (it == table.end()) {
    std::string s = fn + "(";
    for (std::size_t i = 0; i < args.size(); ++i) s += (i ? ", " : "") + args[i];
    out.push_back(s + ")");
    return;
  }
  for (const auto& [callee, raw_args] : it->second.body) {
    std::vector<std::string> bound;
    for (const auto& a : raw_args) {
      if (a[0] != '$') {
        bound.push_back(a);
        continue;
      }
      const auto& ps = it->second.params;
      bound.push_back(args[std::find(ps.begin(), ps.end(), a.substr(1)) - ps.begin()]);
    }
    oracle_expand(table, callee, bound, out);
  }
}

// inline_plan agrees with the oracle on random APIs exactly three levels
// deep, only yields primitives, and is idempotent.
inline PropertyTally inline_oracle_property(std::size_t apis, unsigned seed) {
  PropertyTally tally;
  Rng rng(seed);
  const std::vector<std::string> ids = {"A", "B", "C", "D"};
  const std::map<std::string, std::size_t> primitive_arity = {
      {"goto", 1}, {"pickup", 1}, {"release", 0}, {"open_gripper", 0}, {"close_gripper", 0}};

  for (std::size_t trial = 0; trial < apis; ++trial) {
    Api api;
    std::map<std::string, OracleFn> table;
    std::map<std::string, std::size_t> arity = primitive_arity;
    std::vector<std::vector<std::string>> levels = {{"goto", "pickup", "release", "open_gripper", "close_gripper"}};
    for (std::size_t depth = 1; depth <= 3; ++depth) {
      levels.emplace_back();
      for (std::size_t k = 0, count = 1 + rng.pick(2); k < count; ++k) {
        const std::string name = "l" + std::to_string(depth) + "_" + std::to_string(k);
        OracleFn fn;
        for (std::size_t p = 0, n = rng.pick(3); p < n; ++p) fn.params.push_back("p" + std::to_string(p));
        std::set<std::string> used;
        for (std::size_t st = 0, steps = 1 + rng.pick(3); st < steps; ++st) {
          // The first step calls the level directly below so depth is exact.
          const auto& pool = st == 0 ? levels[depth - 1] : levels[rng.pick(depth)];
          const std::string callee = pool[rng.pick(pool.size())];
          std::vector<std::string> args;
          for (std::size_t a = 0; a < arity[callee]; ++a) {
            if (!fn.params.empty() && rng.chance(0.6)) {
              const auto& p = fn.params[rng.pick(fn.params.size())];
              args.push_back("$" + p);
              used.insert(p);
            } else {
              args.push_back(ids[rng.pick(ids.size())]);
            }
          }
          fn.body.emplace_back(callee, args);
        }
        for (const auto& p : fn.params) {
          if (!used.count(p)) fn.body.emplace_back("pickup", std::vector<std::string>{"$" + p});
        }

        std::string src;
        for (const auto& [callee, args] : fn.body) {
          src += callee + "(";
          for (std::size_t i = 0; i < args.size(); ++i) src += (i ? ", " : "") + args[i];
          src += ");";
        }
        api = register_function(api, taught_def(name, fn.params, src));
        arity[name] = fn.params.size();
        table[name] = fn;
        levels[depth].push_back(name);
      }
    }

    ++tally.cases;
    for (int n = 0; n < 5; ++n) {
      Plan plan;
      std::vector<std::string> expected;
      for (int c = 0; c < 3; ++c) {
        const auto& level = levels[rng.pick(levels.size())];
        const std::string fn = level[rng.pick(level.size())];
        Call call{fn, {}};
        for (std::size_t a = 0; a < arity[fn]; ++a) call.args.push_back(ids[rng.pick(ids.size())]);
        oracle_expand(table, call.function, call.args, expected);
        plan.calls.push_back(call);
      }
      const Plan inlined = inline_plan(plan, api);
      std::vector<std::string> actual;
      for (const auto& c : inlined.calls) actual.push_back(render_call(c));
      if (actual != expected) tally.fail("oracle mismatch on " + render_plan(plan));
      if (!std::all_of(inlined.calls.begin(), inlined.calls.end(), [](const Call& c) { return is_base_name(c.function); }))
        tally.fail("non-primitive left in " + render_plan(inlined));
      if (!(inline_plan(inlined, api) == inlined)) tally.fail("inlining is not idempotent");
    }
  }
  return tally;
}

struct SimTally : PropertyTally {
  std::size_t faulted = 0;
};

// Random plans over the primitives and pack: objects are conserved, at most
// one is held, and a faulting call aborts the plan right there with the
// prefix's effects kept.
inline SimTally sim_conservation_property(std::size_t plans, unsigned seed) {
  SimTally tally;
  Rng rng(seed);
  const auto scene = lunchbag();
  const Simulator sim(scene);
  const auto catalog = scene.catalog();
  const auto ids = catalog.ids();
  const Api api = with_pack();
  auto world = sim.initial_state();
  for (std::size_t n = 0; n < plans; ++n) {
    if (n % 50 == 0) world = sim.initial_state();
    Plan plan;
    for (std::size_t i = 0, len = 1 + rng.pick(8); i < len; ++i) {
      switch (rng.pick(6)) {
        case 0:
          plan.calls.push_back({"goto", {ids[rng.pick(ids.size())]}});
          break;
        case 1:
          plan.calls.push_back({"pickup", {ids[rng.pick(ids.size())]}});
          break;
        case 2:
          plan.calls.push_back({"release", {}});
          break;
        case 3:
          plan.calls.push_back({"open_gripper", {}});
          break;
        case 4:
          plan.calls.push_back({"close_gripper", {}});
          break;
        default:
          plan.calls.push_back({"pack", {ids[rng.pick(ids.size())]}});
      }
    }
    ++tally.cases;
    const Plan flat = inline_plan(plan, api);
    const auto result = sim.exec_plan(world, plan, api);
    const std::string where = render_plan(plan);

    if (result.faulted()) {
      ++tally.faulted;
      const std::size_t at = result.events.size() - 1;
      if (result.executed.size() != at ||
          !std::equal(result.executed.calls.begin(), result.executed.calls.end(), flat.calls.begin()))
        tally.fail("fault did not stop at the offending call: " + where);
      if (at >= flat.size() || !sim.exec_call(sim.exec_plan(world, result.executed, api).world, flat.calls[at]).event.is_fault())
        tally.fail("the reported call does not fault on its own: " + where);
      for (std::size_t i = 0; i < at; ++i)
        if (result.events[i].is_fault()) tally.fail("fault before the last event: " + where);
    } else if (!(result.executed == flat) || result.events.size() != flat.size()) {
      tally.fail("clean plan skipped calls: " + where);
    }
    if (!(result.world == sim.exec_plan(world, result.executed, api).world))
      tally.fail("world differs from the executed prefix: " + where);

    const auto& w = result.world;
    if (w.objects.size() != ids.size()) tally.fail("object count changed: " + where);
    std::size_t held = 0;
    for (const auto& [id, p] : w.objects) {
      if (p.kind == Placement::Kind::Held) {
        ++held;
        if (w.gripper.holding != id) tally.fail("held object is not in the gripper: " + where);
      }
      if (p.kind == Placement::Kind::Inside && (!catalog.find(p.container)->is_container || p.container == id))
        tally.fail("object inside a non-container: " + where);
    }
    if (held > 1 || (held == 1) != w.gripper.holding.has_value()) tally.fail("holding exclusivity broken: " + where);
    world = result.world;
  }
  return tally;
}

// Random goals and taught functions survive export -> import unchanged.
inline PropertyTally context_round_trip_property(std::size_t count, unsigned seed) {
  PropertyTally tally;
  Rng rng(seed);
  const auto scene = lunchbag();
  const auto catalog = scene.catalog();
  const auto ids = catalog.ids();
  const std::vector<std::string> words = {"pack", "lunch", "bag", "the", "my", "kids'", "\"quoted\"", "snack",
                                          "naïve", "café", "tab\there", "line\nbreak", "100%", "{brace}"};
  for (std::size_t n = 0; n < count; ++n) {
    UserContext context;
    for (std::size_t w = 0, len = rng.pick(12); w < len; ++w) context.goal += (w ? " " : "") + words[rng.pick(words.size())];
    for (std::size_t f = 0, functions = rng.pick(6); f < functions; ++f) {
      std::vector<std::string> callable = {"goto", "pickup"};
      for (const auto& def : context.api.taught())
        if (def.signature.arity() <= 1) callable.push_back(def.name());
      FunctionDef def;
      def.signature.name = "skill_" + std::to_string(f);
      def.signature.doc = words[rng.pick(words.size())] + " a specified object";
      def.signature.provenance = rng.chance(0.5) ? Provenance::TaughtLive : Provenance::TaughtMeta;
      const bool has_param = rng.pick(3) != 0;
      if (has_param) def.signature.params = {ParamSpec{"item", ParamKind::ObjectRef, "object such as the Skittles"}};
      BodyTemplate body;
      for (std::size_t s = 0, steps = 1 + rng.pick(4); s < steps; ++s) {
        const auto& fn = callable[rng.pick(callable.size())];
        if (context.api.find(fn)->signature.arity() == 0) {
          body.steps.push_back({fn, {}});
        } else {
          const bool use_param = has_param && (s == 0 || rng.chance(0.5));
          body.steps.push_back(
              {fn, {use_param ? TemplateArg::param("item") : TemplateArg::constant(ids[rng.pick(ids.size())])}});
        }
      }
      if (has_param && std::none_of(body.steps.begin(), body.steps.end(), [](const TemplateCall& c) {
            return !c.args.empty() && c.args[0].is_param();
          }))
        body.steps.push_back({"pickup", {TemplateArg::param("item")}});
      body.steps.push_back({"release", {}});
      def.body = body;
      context.api = register_function(context.api, def);
    }

    ++tally.cases;
    try {
      const std::string exported = context_to_json(context).dump(2);
      const UserContext imported = context_from_json(nlohmann::json::parse(exported), &catalog);
      if (!(imported == context)) tally.fail("import changed the context: " + exported);
      if (context_to_json(imported).dump(2) != exported) tally.fail("re-export is not byte-equal: " + exported);
      const Session session(scene, Mode::MetaPrompting, nullptr, nullptr, {}, imported);
      if (session.export_context().dump(2) != exported) tally.fail("session export differs: " + exported);
    } catch (const Error& e) {
      tally.fail(std::string("round trip threw ") + e.code() + ": " + e.what());
    }
  }
  return tally;
}

// Backend that answers at random: plans (some of which fault), clarifications,
// done, or an outage.
class ChaosBackend final : public PlannerBackend {
 public:
  explicit ChaosBackend(unsigned seed) : rng_(seed) {}

  PlannerResponse generate(const PlannerRequest& request) override {
    const auto ids = request.objects.ids();
    switch (rng_.pick(8)) {
      case 0:
        throw Error("BackendUnavailable", "simulated outage");
      case 1:
        return {Clarification{"Which one?"}, 0, 0.5};
      case 2:
        return {GoalDone{}, 0, 0.0};
      case 3:
      case 4:
        return mock_generate(request);
      default: {
        Plan plan;
        for (std::size_t i = 0, n = 1 + rng_.pick(4); i < n; ++i) {
          const auto& def = request.api.entries()[rng_.pick(request.api.entries().size())];
          Call call{def.name(), {}};
          for (std::size_t a = 0; a < def.signature.arity(); ++a) call.args.push_back(ids[rng_.pick(ids.size())]);
          plan.calls.push_back(std::move(call));
        }
        return {plan, 0, 1.25};
      }
    }
  }
  std::string_view name() const override { return "chaos"; }

 private:
  Rng rng_;
};

struct GatingTally : PropertyTally {
  std::size_t operations = 0;
  std::size_t robot_executions = 0;
  std::size_t unconfirmed_robot_executions = 0;
};

// Drives random event traces through fresh live sessions and checks the
// confirmation gate and the state machine after every event.
inline GatingTally gating_property(std::size_t traces, unsigned seed) {
  GatingTally tally;
  Rng rng(seed);
  const auto scene = lunchbag();
  const Simulator sim(scene);
  const std::string goal = "pack the Skittles, the Rice Krispies treat and the hand sanitizer in the lunch bag";
  const std::vector<std::string> utterances = {"put the skittles in the bag", "pack the gummies", "release it",
                                               "pick up the hand sanitizer", "go to the lunch bag", "dance",
                                               "open the gripper", "put the rice krispies in the lunchbox"};

  for (std::size_t trace = 0; trace < traces; ++trace) {
    ++tally.cases;
    SessionOptions options;
    options.proactive = rng.pick(4) != 0;
    options.auto_confirm_user_plans = rng.pick(4) == 0;
    const UserContext context{goal, rng.chance(0.5) ? with_pack() : Api()};
    std::unique_ptr<PlannerBackend> backend;
    if (rng.chance(0.5)) backend = std::make_unique<ChaosBackend>(seed * 7919u + static_cast<unsigned>(trace));
    Session s(scene, Mode::Live, std::move(backend), nullptr, options, context);

    for (std::size_t op = 0, length = 1 + rng.pick(12); op < length; ++op) {
      ++tally.operations;
      const auto state_before = s.state();
      const auto history_before = s.history().size();
      const auto world_before = s.world();
      const double clock_before = s.clock();
      bool expect_wrong_state = false;
      try {
        switch (rng.pick(8)) {
          case 0:
          case 1:
            expect_wrong_state = state_before != SessionState::Idle;
            s.handle_utterance(utterances[rng.pick(utterances.size())]);
            break;
          case 2:
          case 3:
            expect_wrong_state = state_before != SessionState::AwaitingConfirmation;
            s.confirm();
            break;
          case 4:
            expect_wrong_state = state_before != SessionState::AwaitingConfirmation;
            s.reject();
            break;
          case 5: {
            const auto last = std::find_if(s.history().rbegin(), s.history().rend(),
                                           [](const InteractionStep& st) { return st.kind == StepKind::Plan; });
            expect_wrong_state = state_before != SessionState::Idle ||
                                 (last != s.history().rend() && last->execution == ExecutionStatus::Faulted);
            s.request_suggestion();
            break;
          }
          case 6:
            s.wait(static_cast<double>(rng.pick(5)));
            break;
          default:
            if (rng.pick(4) == 0) {
              s.end();
            } else {
              s.teach_live({"stash the gummies", Plan{{{"pickup", {"GUMMIES"}}, {"goto", {"LUNCH_BAG"}}, {"release", {}}}}});
            }
        }
        if (expect_wrong_state) tally.fail("operation accepted in state " + std::string(to_string(state_before)));
      } catch (const Error& e) {
        // Teaching the same verb ten times runs out of name suffixes.
        const bool naming = e.code() == "NameCollision" || e.code() == "DuplicateName";
        if (!naming && !(e.code() == "WrongState" && expect_wrong_state))
          tally.fail("unexpected " + e.code() + ": " + e.what());
        if (s.history().size() != history_before || !(s.world() == world_before))
          tally.fail("a rejected operation changed the session");
      }

      const auto& history = s.history();
      if (history.size() < history_before) tally.fail("history shrank");
      for (std::size_t i = history_before; i < history.size(); ++i) {
        const auto& step = history[i];
        if (step.index != i) tally.fail("history index gap");
        try {
          check_step(step);
        } catch (const Error& e) {
          tally.fail(std::string("bad step: ") + e.what());
        }
        if (!step.executed()) continue;
        if (step.initiator == Initiator::RobotProactive) {
          ++tally.robot_executions;
          if (step.confirmation != Confirmation::Confirmed) ++tally.unconfirmed_robot_executions;
        }
        if (step.confirmation == Confirmation::Rejected) tally.fail("rejected plan executed");
        if (step.confirmation == Confirmation::NotRequired &&
            !(step.initiator == Initiator::User && options.auto_confirm_user_plans))
          tally.fail("plan executed without a gate");
      }
      const bool any_executed = std::any_of(history.begin() + static_cast<std::ptrdiff_t>(history_before),
                                            history.end(), [](const InteractionStep& st) { return st.executed(); });
      if (!any_executed && !(s.world() == world_before)) tally.fail("world changed without an execution");

      const auto state = s.state();
      if (state == SessionState::Planning || state == SessionState::Executing || state == SessionState::Teaching)
        tally.fail("transient state leaked: " + std::string(to_string(state)));
      if (s.pending().has_value() != (state == SessionState::AwaitingConfirmation))
        tally.fail("pending plan and state disagree");
      if (s.clock() < clock_before) tally.fail("clock went backwards");
      const auto m = s.metrics();
      const auto& t = m.time_breakdown;
      if (std::abs(m.total_time - (t.instructing + t.executing + t.confirming + t.idle)) > 1e-9 ||
          std::abs(m.total_time - s.clock()) > 1e-9)
        tally.fail("time breakdown does not add up");
      if (m.robot_initiated_accepted > m.robot_initiated) tally.fail("more accepted than proposed");
      if (state == SessionState::Done) break;
    }

    // The world is exactly what re-running the executed steps produces.
    auto world = sim.initial_state();
    Api api = context.api;
    for (const auto& step : s.history()) {
      if (step.kind == StepKind::Teaching) api = register_function(api, *step.taught);
      if (step.executed()) world = sim.exec_plan(world, step.plan, api).world;
    }
    WorldState actual = s.world();
    world.clock = actual.clock = 0.0;
    if (!(world == actual)) tally.fail("world diverged from its history");
  }
  if (tally.unconfirmed_robot_executions > 0)
    tally.fail(std::to_string(tally.unconfirmed_robot_executions) + " unconfirmed robot plans executed");
  return tally;
}

}  // namespace provox::testing
