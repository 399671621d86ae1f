#include <map>
#include <random>

#include <gtest/gtest.h>

#include "golden_support.hpp"
#include "provox/eval.hpp"
#include "support.hpp"

namespace provox {
namespace {

const SceneSpec& grocery_scene() {
  static const SceneSpec scene = testing::grocery();
  return scene;
}

Plan grocery_reference() {
  return load_reference_file(testing::source_path("fixtures/grocery/reference.json"), grocery_scene().catalog());
}

std::vector<NamedContext> grocery_contexts() {
  return load_context_dir(testing::source_path("fixtures/grocery/contexts"), grocery_scene().catalog());
}

TEST(Conditions, Names) {
  for (auto c : kAllConditions) EXPECT_EQ(condition_from_string(to_string(c)), c);
  EXPECT_EQ(parse_conditions("full, fixed-api"), (std::vector<EvalCondition>{EvalCondition::Full, EvalCondition::FixedApi}));
  EXPECT_THROW(parse_conditions(""), Error);
  EXPECT_THROW(condition_from_string("partial"), Error);
}

TEST(Conditions, Ablations) {
  const UserContext full{"pack my lunch", testing::with_pack()};
  const auto goal = make_condition_context(full, EvalCondition::FixedGoal);
  EXPECT_EQ(goal.goal, "to help the user with a tabletop task");
  EXPECT_TRUE(goal.api.contains("pack"));
  const auto api = make_condition_context(full, EvalCondition::FixedApi);
  EXPECT_EQ(api.goal, "pack my lunch");
  EXPECT_EQ(api.api.taught_count(), 0u);
  const auto none = make_condition_context(full, EvalCondition::FixedContext);
  EXPECT_EQ(none, (UserContext{std::string(kNeutralGoal), Api()}));
  EXPECT_EQ(make_condition_context(full, EvalCondition::Full), full);
}

TEST(Overlap, Examples) {
  const auto ref = grocery_reference();
  EXPECT_EQ(efficacy_overlap(ref, ref), 9u);
  EXPECT_EQ(efficacy_overlap(Plan{}, ref), 0u);
  // The pen's delivery replaced by a segment about the lotion.
  auto swapped = ref;
  const auto pen = std::find(swapped.calls.begin(), swapped.calls.end(), Call{"pickup", {"PEN"}});
  ASSERT_NE(pen, swapped.calls.end());
  *pen = {"pickup", {"LOTION"}};
  *(pen + 1) = {"goto", {"LOTION"}};
  *(pen + 2) = {"open_gripper", {}};
  EXPECT_EQ(efficacy_overlap(swapped, ref), 6u);
  // goto(BAG) appears three times in the reference; a fourth does not count.
  auto extra = ref;
  extra.calls.push_back({"goto", {"BAG"}});
  EXPECT_EQ(efficacy_overlap(extra, ref), 9u);
  auto reversed = ref;
  std::reverse(reversed.calls.begin(), reversed.calls.end());
  EXPECT_EQ(efficacy_overlap(reversed, ref), 9u);
  EXPECT_LT(lcs_overlap(reversed, ref), 9u);
}

std::size_t greedy_matching_oracle(const Plan& trace, Plan reference) {
  std::size_t matched = 0;
  for (const auto& call : trace.calls) {
    const auto it = std::find(reference.calls.begin(), reference.calls.end(), call);
    if (it != reference.calls.end()) {
      reference.calls.erase(it);
      ++matched;
    }
  }
  return matched;
}

bool is_subsequence(const std::vector<Call>& small, const Plan& big) {
  std::size_t i = 0;
  for (const auto& call : big.calls)
    if (i < small.size() && small[i] == call) ++i;
  return i == small.size();
}

std::size_t brute_force_lcs(const Plan& a, const Plan& b) {
  std::size_t best = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << a.size()); ++mask) {
    std::vector<Call> sub;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (std::size_t{1} << i)) sub.push_back(a.calls[i]);
    if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
  }
  return best;
}

TEST(OverlapProperty, MatchesBruteForce) {
  std::mt19937 rng(29);
  const std::vector<Call> alphabet = {{"pickup", {"PEN"}}, {"goto", {"BAG"}}, {"release", {}}, {"pickup", {"CANDY"}}};
  auto random_plan = [&](std::size_t max) {
    Plan p;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, max)(rng);
    for (std::size_t i = 0; i < n; ++i)
      p.calls.push_back(alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)]);
    return p;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_plan(10);
    const auto b = random_plan(10);
    ASSERT_EQ(efficacy_overlap(a, b), greedy_matching_oracle(a, b));
    ASSERT_EQ(efficacy_overlap(a, b), efficacy_overlap(b, a));
    ASSERT_EQ(lcs_overlap(a, b), brute_force_lcs(a, b));
    ASSERT_LE(lcs_overlap(a, b), efficacy_overlap(a, b));
  }
}

TEST(Reference, Forms) {
  const auto catalog = grocery_scene().catalog();
  const auto from_string = reference_from_json(nlohmann::json::parse(R"json({"calls": "pickup(PEN); goto(BAG)"})json"), catalog);
  const auto from_list = reference_from_json(nlohmann::json::parse(R"json({"calls": ["pickup(PEN)", "goto(BAG)"]})json"), catalog);
  EXPECT_EQ(from_string, from_list);
  EXPECT_EQ(grocery_reference().size(), 9u);
  EXPECT_THROW(reference_from_json(nlohmann::json::parse(R"json({"calls": []})json"), catalog), Error);
  EXPECT_THROW(reference_from_json(nlohmann::json::parse(R"json({"calls": "bag(PEN)"})json"), catalog), Error);
  EXPECT_THROW(reference_from_json(nlohmann::json::parse(R"json({"calls": "pickup(SKITTLES)"})json"), catalog), Error);
}

TEST(Rollout, FullAndEmptyContexts) {
  const auto contexts = grocery_contexts();
  ASSERT_EQ(contexts.size(), 3u);
  EXPECT_EQ(contexts[0].name, "user01");
  MockBackend backend;
  const auto full = run_proactive_rollout(contexts[0].context, grocery_scene(), backend, 11);
  EXPECT_EQ(full.trace.size(), 9u);
  EXPECT_EQ(full.stop_reason, "done");
  EXPECT_EQ(full.steps_taken, 3u);
  const auto none = run_proactive_rollout(make_condition_context(contexts[0].context, EvalCondition::FixedContext),
                                          grocery_scene(), backend, 11);
  EXPECT_LE(none.trace.size(), 3u);
  const auto capped = run_proactive_rollout(contexts[0].context, grocery_scene(), backend, 1);
  EXPECT_EQ(capped.trace.size(), 3u);
  EXPECT_EQ(capped.stop_reason, "step-cap");
  EXPECT_THROW(run_proactive_rollout(contexts[0].context, grocery_scene(), backend, 0), Error);
}

TEST(Study, GroceryFixtureExactValues) {
  MockBackend backend;
  const auto report = run_study(grocery_contexts(), grocery_reference(), grocery_scene(), backend);
  EXPECT_EQ(report.step_cap, 11u);
  EXPECT_EQ(report.reference_size, 9u);
  ASSERT_EQ(report.results.size(), 12u);
  const std::map<std::string, std::array<std::size_t, 4>> expected = {
      {"user01", {9, 6, 3, 0}}, {"user02", {9, 3, 6, 0}}, {"user03", {9, 3, 6, 0}}};
  for (const auto& [name, values] : expected) {
    for (std::size_t i = 0; i < 4; ++i) {
      const auto* result = report.find(name, kAllConditions[i]);
      ASSERT_NE(result, nullptr);
      EXPECT_EQ(result->helpful_actions, values[i]) << name << " " << to_string(kAllConditions[i]);
    }
    const auto score = [&](EvalCondition c) { return report.find(name, c)->helpful_actions; };
    EXPECT_GT(score(EvalCondition::Full), score(EvalCondition::FixedGoal));
    EXPECT_GT(score(EvalCondition::FixedGoal), score(EvalCondition::FixedContext));
    EXPECT_GT(score(EvalCondition::Full), score(EvalCondition::FixedApi));
    EXPECT_GT(score(EvalCondition::FixedApi), score(EvalCondition::FixedContext));
  }
  ASSERT_EQ(report.summaries.size(), 4u);
  EXPECT_DOUBLE_EQ(report.summaries[0].mean, 9.0);
  EXPECT_DOUBLE_EQ(report.summaries[1].mean, 4.0);
  EXPECT_DOUBLE_EQ(report.summaries[2].mean, 5.0);
  EXPECT_DOUBLE_EQ(report.summaries[3].mean, 0.0);
  EXPECT_DOUBLE_EQ(report.summaries[1].standard_error, 1.0);
  const auto json = report.to_json();
  EXPECT_EQ(json.at("metadata").at("step_cap"), 11);
  EXPECT_NE(report.to_table().find("fixed-context"), std::string::npos);
}

// On random single-item-per-source contexts, full never scores below a
// partial condition and no partial condition scores below fixed-context.
TEST(StudyProperty, OrderingOnGeneratedContexts) {
  const auto catalog = grocery_scene().catalog();
  const std::vector<std::string> items = {"LOTION", "PEN", "CANDY"};
  const auto reference = grocery_reference();
  MockBackend backend;
  for (std::size_t goal_mask = 0; goal_mask < 8; ++goal_mask) {
    for (std::size_t doc_mask = 0; doc_mask < 8; ++doc_mask) {
      UserContext context;
      context.goal = "Put";
      for (std::size_t i = 0; i < items.size(); ++i)
        if (goal_mask & (1u << i)) context.goal += " the " + catalog.find(items[i])->display_name + ",";
      context.goal += " in the bag";
      FunctionDef def;
      def.signature.name = "bag";
      def.signature.params = {ParamSpec{"obj", ParamKind::ObjectRef, ""}};
      def.signature.doc = "bag an item";
      for (std::size_t i = 0; i < items.size(); ++i)
        if (doc_mask & (1u << i)) def.signature.doc += " such as the " + catalog.find(items[i])->display_name;
      def.body = parse_body("pickup($obj); goto(BAG); release()");
      context.api = register_function(Api(), def);

      const auto report = run_study({{"generated", context}}, reference, grocery_scene(), backend);
      const auto score = [&](EvalCondition c) { return report.find("generated", c)->helpful_actions; };
      EXPECT_GE(score(EvalCondition::Full), score(EvalCondition::FixedGoal));
      EXPECT_GE(score(EvalCondition::Full), score(EvalCondition::FixedApi));
      EXPECT_GE(score(EvalCondition::FixedGoal), score(EvalCondition::FixedContext));
      EXPECT_GE(score(EvalCondition::FixedApi), score(EvalCondition::FixedContext));
      EXPECT_EQ(score(EvalCondition::Full), 3u * static_cast<std::size_t>(__builtin_popcount(goal_mask | doc_mask)))
          << context.goal << " / " << def.signature.doc;
    }
  }
}

UserContext lunch_context() {
  return {"pack my kids' lunch with Skittles, Rice-Krispies and hand sanitizer while I make their sandwiches",
          testing::with_pack()};
}

const std::vector<std::string> kLunchItems = {"SKITTLES", "RICE_KRISPIES", "HAND_SANITIZER"};

TEST(ScriptedUser, ProactivityReducesBurden) {
  const auto scene = testing::lunchbag();
  const auto on = run_scripted_user(lunch_context(), scene, kLunchItems, "LUNCH_BAG", true);
  const auto off = run_scripted_user(lunch_context(), scene, kLunchItems, "LUNCH_BAG", false);
  for (const auto& id : kLunchItems) {
    EXPECT_TRUE(on.world.is_inside(id, "LUNCH_BAG"));
    EXPECT_TRUE(off.world.is_inside(id, "LUNCH_BAG"));
  }
  EXPECT_LE(on.metrics.user_initiated, 1u);
  EXPECT_GE(on.metrics.robot_initiated, 2u);
  EXPECT_EQ(off.metrics.user_initiated, kLunchItems.size());
  EXPECT_EQ(off.metrics.robot_initiated, 0u);
  EXPECT_LT(on.metrics.total_time, off.metrics.total_time);
  EXPECT_GE(static_cast<double>(on.metrics.robot_initiated_accepted) / static_cast<double>(on.metrics.total_plans()),
            0.30);
  const nlohmann::json golden = {{"proactive", on.metrics.to_json()}, {"non_proactive", off.metrics.to_json()}};
  testing::expect_golden("scripted_user_metrics.json", golden.dump(2) + "\n");
}

TEST(ScriptedUser, UnknownContainer) {
  EXPECT_THROW(run_scripted_user(lunch_context(), testing::lunchbag(), kLunchItems, "TOTE", true), Error);
}

}  // namespace
}  // namespace provox
