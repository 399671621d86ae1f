#include "provox/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <iterator>
#include <map>

#include "provox/text.hpp"

namespace provox {

namespace {

const std::set<std::string>& leading_filler() {
  static const std::set<std::string> words = {"please", "can",  "could", "would", "will", "you",  "robot",
                                              "hey",    "ok",   "okay",  "now",   "then", "just", "so",
                                              "and",    "also", "i",     "want",  "to",   "let",  "s"};
  return words;
}

std::vector<std::string> param_names_for(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i) names.push_back(i == 0 ? "obj" : "obj" + std::to_string(i + 1));
  return names;
}

void validate_example(const TeachExample& example, const Api& api, const Catalog& objects) {
  if (example.decomposition.empty()) throw Error("EmptyDecomposition", "a decomposition needs at least one call");
  validate_plan(example.decomposition, api, objects);
}

std::vector<ObjectRef> objects_of(const Plan& plan, const Catalog& objects) {
  std::vector<ObjectRef> out;
  for (const auto& id : distinct_ids(plan)) {
    if (const auto* obj = objects.find(id)) out.push_back(*obj);
  }
  return out;
}

bool ends_with_word(std::string_view text, std::size_t end, std::string_view word) {
  if (end < word.size() + 1) return false;
  const std::size_t start = end - word.size() - 1;
  if (start > 0 && text[start - 1] != ' ') return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[start + i])) != word[i]) return false;
  }
  return text[end - 1] == ' ';
}

}  // namespace

LiftPolicy lift_policy_from_string(std::string_view text) {
  if (text == "manipulated") return LiftPolicy::Manipulated;
  if (text == "all-aligned") return LiftPolicy::AllAligned;
  if (text == "all") return LiftPolicy::All;
  throw Error("InvalidArgument", "unknown lift policy '" + std::string(text) + "'");
}

std::vector<std::string> distinct_ids(const Plan& plan) {
  std::vector<std::string> ids;
  for (const auto& call : plan.calls) {
    for (const auto& arg : call.args) {
      if (std::find(ids.begin(), ids.end(), arg) == ids.end()) ids.push_back(arg);
    }
  }
  return ids;
}

std::vector<LiftingCandidate> enumerate_liftings(const TeachExample& example) {
  const auto ids = distinct_ids(example.decomposition);
  const std::size_t k = ids.size();
  std::vector<std::vector<std::size_t>> subsets;
  for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (std::size_t{1} << i)) members.push_back(i);
    }
    subsets.push_back(std::move(members));
  }
  std::sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a < b;
  });

  std::vector<LiftingCandidate> out;
  out.reserve(subsets.size());
  for (const auto& members : subsets) {
    LiftingCandidate c;
    for (auto i : members) c.lifted_ids.push_back(ids[i]);
    c.param_names = param_names_for(members.size());
    out.push_back(std::move(c));
  }
  return out;
}

std::set<std::string> align_utterance(std::string_view utterance, const std::vector<ObjectRef>& objects) {
  std::set<std::string> out;
  for (const auto& obj : objects) {
    if (text::find_mention(utterance, obj)) out.insert(obj.id);
  }
  return out;
}

std::set<std::string> manipulated_ids(const Plan& plan, const Api& api) {
  std::set<std::string> out;
  for (const auto& call : inline_plan(plan, api).calls) {
    if (call.function == "pickup" && !call.args.empty()) out.insert(call.args.front());
  }
  return out;
}

LiftingCandidate select_lifting(const TeachExample& example, const Api& api, const Catalog& objects,
                                LiftPolicy policy) {
  const auto aligned = align_utterance(example.trigger_utterance, objects_of(example.decomposition, objects));
  std::set<std::string> lift;
  switch (policy) {
    case LiftPolicy::All: {
      const auto ids = distinct_ids(example.decomposition);
      lift.insert(ids.begin(), ids.end());
      break;
    }
    case LiftPolicy::AllAligned:
      lift = aligned;
      break;
    case LiftPolicy::Manipulated: {
      const auto manipulated = manipulated_ids(example.decomposition, api);
      std::set_intersection(manipulated.begin(), manipulated.end(), aligned.begin(), aligned.end(),
                            std::inserter(lift, lift.end()));
      if (lift.empty()) lift = manipulated;
      break;
    }
  }
  for (auto& candidate : enumerate_liftings(example)) {
    const std::set<std::string> members(candidate.lifted_ids.begin(), candidate.lifted_ids.end());
    if (members == lift) return candidate;
  }
  throw Error("InternalError", "lifting not found among candidates");
}

BodyTemplate lift_body(const Plan& decomposition, const LiftingCandidate& lifting) {
  std::map<std::string, std::string> param_of;
  for (std::size_t i = 0; i < lifting.lifted_ids.size(); ++i) param_of[lifting.lifted_ids[i]] = lifting.param_names[i];
  BodyTemplate body;
  for (const auto& call : decomposition.calls) {
    TemplateCall step{call.function, {}};
    for (const auto& arg : call.args) {
      auto it = param_of.find(arg);
      step.args.push_back(it == param_of.end() ? TemplateArg::constant(arg) : TemplateArg::param(it->second));
    }
    body.steps.push_back(std::move(step));
  }
  return body;
}

std::string unique_name(const Api& api, const std::string& base) {
  if (!api.contains(base)) return base;
  for (int suffix = 2; suffix <= 9; ++suffix) {
    std::string candidate = base + "_" + std::to_string(suffix);
    if (!api.contains(candidate)) return candidate;
  }
  throw Error("NameCollision", "no free name left for '" + base + "'", {base});
}

NameDoc HeuristicNamer::name_and_doc(const TeachExample& example, const LiftingCandidate& lifting,
                                     const Catalog& objects) {
  NameDoc out;
  for (const auto& word : text::tokens(example.trigger_utterance)) {
    if (leading_filler().count(word)) continue;
    for (char c : word) {
      if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') out.name.push_back(c);
    }
    break;
  }
  if (!out.name.empty() && out.name.front() >= '0' && out.name.front() <= '9') out.name = "do_" + out.name;
  if (out.name.empty()) throw Error("NamingFailed", "could not derive a name from '" + example.trigger_utterance + "'");

  // Rewrite mentions right to left so earlier offsets stay valid.
  struct Edit {
    std::size_t begin, end;
    std::string replacement;
  };
  std::vector<Edit> edits;
  const std::set<std::string> lifted(lifting.lifted_ids.begin(), lifting.lifted_ids.end());
  const std::string& utterance = example.trigger_utterance;
  for (const auto& obj : objects_of(example.decomposition, objects)) {
    const auto m = text::find_mention(utterance, obj);
    if (!m) continue;
    Edit edit{m->offset, m->offset + m->length, obj.display_name};
    if (lifted.count(obj.id)) {
      edit.replacement = "a specified object";
      for (std::string_view article : {"the", "a", "an", "some", "my"}) {
        if (ends_with_word(utterance, edit.begin, article)) {
          edit.begin -= article.size() + 1;
          break;
        }
      }
    }
    edits.push_back(std::move(edit));
  }
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.begin > b.begin; });
  std::string doc = utterance;
  std::size_t limit = doc.size();
  for (const auto& e : edits) {
    if (e.end > limit) continue;  // overlapping mention
    doc.replace(e.begin, e.end - e.begin, e.replacement);
    limit = e.begin;
  }
  out.doc = doc;
  return out;
}

FunctionDef synthesize_function(const TeachExample& example, const Api& api, const Catalog& objects,
                                NameDocProvider& namer, LiftPolicy policy) {
  validate_example(example, api, objects);
  const LiftingCandidate lifting = select_lifting(example, api, objects, policy);
  NameDoc named = namer.name_and_doc(example, lifting, objects);
  if (!is_function_name(named.name))
    throw Error("NamingFailed", "provider returned invalid function name '" + named.name + "'");

  FunctionDef def;
  def.signature.name = unique_name(api, named.name);
  def.signature.doc = named.doc;
  def.signature.provenance = Provenance::TaughtLive;
  for (std::size_t i = 0; i < lifting.param_names.size(); ++i) {
    const auto* obj = objects.find(lifting.lifted_ids[i]);
    def.signature.params.push_back(ParamSpec{lifting.param_names[i], ParamKind::ObjectRef,
                                             "object such as the " + (obj ? obj->display_name : lifting.lifted_ids[i])});
  }
  def.body = lift_body(example.decomposition, lifting);
  return def;
}

TeachForm teach_form_from_json(const nlohmann::json& json) {
  try {
    TeachForm form;
    form.name = json.at("name").get<std::string>();
    form.behavior_description = json.value("description", json.value("behavior", ""));
    for (const auto& p : json.value("params", nlohmann::json::array())) form.params.push_back(p.get<std::string>());
    for (const auto& step : json.at("steps")) {
      if (step.is_string()) {
        form.steps.push_back(parse_template_call(step.get<std::string>()));
        continue;
      }
      TemplateCall call{step.at("function").get<std::string>(), {}};
      for (const auto& arg : step.value("args", nlohmann::json::array())) {
        const auto value = arg.get<std::string>();
        if (!value.empty() && value.front() == '$')
          call.args.push_back(TemplateArg::param(value.substr(1)));
        else
          call.args.push_back(TemplateArg::constant(value));
      }
      form.steps.push_back(std::move(call));
    }
    return form;
  } catch (const nlohmann::json::exception& e) {
    throw Error("SchemaError", std::string("malformed teach form: ") + e.what());
  }
}

nlohmann::json teach_form_to_json(const TeachForm& form) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : form.steps) steps.push_back(render_template_call(s));
  return {{"name", form.name}, {"description", form.behavior_description}, {"params", form.params}, {"steps", steps}};
}

FunctionDef form_to_def(const TeachForm& form, const Catalog& objects) {
  FunctionDef def;
  def.signature.name = form.name;
  def.signature.doc = form.behavior_description;
  def.signature.provenance = Provenance::TaughtMeta;
  for (const auto& p : form.params) def.signature.params.push_back(ParamSpec{p, ParamKind::ObjectRef, ""});
  def.body = BodyTemplate{form.steps};
  validate_body_objects(def, objects);
  return def;
}

FunctionDef synthesize_from_form(const TeachForm& form, const Api& api, const Catalog& objects) {
  FunctionDef def = form_to_def(form, objects);
  // Surfaces registration errors (DuplicateName, UnboundParam, ...) up front.
  (void)register_function(api, def);
  return def;
}

}  // namespace provox
