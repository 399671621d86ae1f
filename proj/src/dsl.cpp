#include "provox/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace provox {

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(char c) { return is_upper(c) || is_lower(c) || is_digit(c) || c == '_'; }

FunctionDef primitive(std::string name, std::vector<ParamSpec> params, std::string doc) {
  return FunctionDef{SkillSignature{std::move(name), std::move(params), std::move(doc), Provenance::Base},
                     std::nullopt};
}

// ---------------------------------------------------------------- lexer

enum class TokenKind { Ident, Param, LParen, RParen, Comma, Semi, End };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t position;
};

std::string describe(const Token& token) {
  switch (token.kind) {
    case TokenKind::End:
      return "end of input";
    case TokenKind::Param:
      return "'$" + token.text + "'";
    default:
      return "'" + token.text + "'";
  }
}

[[noreturn]] void syntax_error(std::size_t position, const std::string& what) {
  throw Error("SyntaxError", "syntax error at position " + std::to_string(position) + ": " + what);
}

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    switch (c) {
      case '(':
        tokens.push_back({TokenKind::LParen, "(", start});
        ++i;
        continue;
      case ')':
        tokens.push_back({TokenKind::RParen, ")", start});
        ++i;
        continue;
      case ',':
        tokens.push_back({TokenKind::Comma, ",", start});
        ++i;
        continue;
      case ';':
        tokens.push_back({TokenKind::Semi, ";", start});
        ++i;
        continue;
      default:
        break;
    }
    if (c == '$') {
      ++i;
      const std::size_t name_start = i;
      while (i < text.size() && is_ident_char(text[i])) ++i;
      if (i == name_start) syntax_error(start, "expected parameter name after '$'");
      tokens.push_back({TokenKind::Param, std::string(text.substr(name_start, i - name_start)), start});
      continue;
    }
    if (is_ident_char(c) && !is_digit(c)) {
      while (i < text.size() && is_ident_char(text[i])) ++i;
      tokens.push_back({TokenKind::Ident, std::string(text.substr(start, i - start)), start});
      continue;
    }
    syntax_error(start, "unexpected character '" + std::string(1, c) + "'");
  }
  tokens.push_back({TokenKind::End, "", text.size()});
  return tokens;
}

class Parser {
 public:
  Parser(std::string_view text, bool allow_params) : tokens_(lex(text)), allow_params_(allow_params) {}

  std::vector<TemplateCall> parse_sequence() {
    std::vector<TemplateCall> calls;
    while (peek().kind != TokenKind::End) {
      calls.push_back(parse_call());
      if (peek().kind == TokenKind::Semi) {
        advance();
        continue;
      }
      if (peek().kind != TokenKind::End) syntax_error(peek().position, "expected ';' but found " + describe(peek()));
    }
    return calls;
  }

  TemplateCall parse_single() {
    TemplateCall call = parse_call();
    if (peek().kind == TokenKind::Semi) advance();
    if (peek().kind != TokenKind::End) syntax_error(peek().position, "expected end of call but found " + describe(peek()));
    return call;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_++]; }

  const Token& expect(TokenKind kind, const char* what) {
    if (peek().kind != kind) syntax_error(peek().position, std::string("expected ") + what + " but found " + describe(peek()));
    return advance();
  }

  TemplateCall parse_call() {
    const Token& name = expect(TokenKind::Ident, "function name");
    if (!is_function_name(name.text)) syntax_error(name.position, "invalid function name '" + name.text + "'");
    TemplateCall call{name.text, {}};
    expect(TokenKind::LParen, "'('");
    if (peek().kind == TokenKind::RParen) {
      advance();
      return call;
    }
    for (;;) {
      const Token& arg = advance();
      if (arg.kind == TokenKind::Ident) {
        if (!is_object_id(arg.text)) syntax_error(arg.position, "invalid object id '" + arg.text + "'");
        call.args.push_back(TemplateArg::constant(arg.text));
      } else if (arg.kind == TokenKind::Param && allow_params_) {
        if (!is_param_name(arg.text)) syntax_error(arg.position, "invalid parameter name '$" + arg.text + "'");
        call.args.push_back(TemplateArg::param(arg.text));
      } else {
        syntax_error(arg.position, "expected argument but found " + describe(arg));
      }
      if (peek().kind == TokenKind::Comma) {
        advance();
        continue;
      }
      expect(TokenKind::RParen, "',' or ')'");
      return call;
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  bool allow_params_;
};

Call to_call(const TemplateCall& t) {
  Call call{t.function, {}};
  for (const auto& arg : t.args) call.args.push_back(arg.value);
  return call;
}

std::size_t index_of(const std::vector<FunctionDef>& entries, std::string_view name) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name() == name) return i;
  }
  return entries.size();
}

// Checks a taught definition against the entries that precede it.
void check_definition(const FunctionDef& def, const std::vector<FunctionDef>& visible) {
  const auto& sig = def.signature;
  if (!is_function_name(sig.name)) throw Error("InvalidName", "invalid function name '" + sig.name + "'");
  if (sig.provenance == Provenance::Base || !def.body)
    throw Error("BasePrimitiveImmutable", "cannot register primitive '" + sig.name + "'");
  std::set<std::string> declared;
  for (const auto& p : sig.params) {
    if (!is_param_name(p.name)) throw Error("InvalidName", "invalid parameter name '" + p.name + "'");
    if (!declared.insert(p.name).second)
      throw Error("DuplicateParam", "parameter '" + p.name + "' declared twice in '" + sig.name + "'");
  }
  if (def.body->steps.empty()) throw Error("EmptyBody", "function '" + sig.name + "' has an empty body");

  std::set<std::string> used;
  for (const auto& step : def.body->steps) {
    const auto at = index_of(visible, step.function);
    if (at == visible.size())
      throw Error("UnknownBodyFunction",
                  "body of '" + sig.name + "' calls '" + step.function + "' which is not defined before it",
                  {step.function});
    const auto expected = visible[at].signature.arity();
    if (step.args.size() != expected)
      throw Error("ArityMismatch", "'" + step.function + "' expects " + std::to_string(expected) +
                                       " argument(s), got " + std::to_string(step.args.size()),
                  {step.function});
    for (const auto& arg : step.args) {
      if (arg.is_param()) {
        if (!declared.count(arg.value))
          throw Error("UnboundParam", "'$" + arg.value + "' is not a parameter of '" + sig.name + "'", {arg.value});
        used.insert(arg.value);
      } else if (!is_object_id(arg.value)) {
        throw Error("SyntaxError", "invalid object id '" + arg.value + "'");
      }
    }
  }
  for (const auto& p : sig.params) {
    if (!used.count(p.name))
      throw Error("UnreferencedParam", "parameter '" + p.name + "' of '" + sig.name + "' is never used", {p.name});
  }
}

void expand(const Call& call, const Api& api, std::size_t depth, std::vector<Call>& out) {
  if (depth > kMaxExpansionDepth)
    throw Error("InternalError", "expansion depth exceeded while inlining '" + call.function + "'");
  const FunctionDef* def = api.find(call.function);
  if (def == nullptr) throw Error("UnknownFunction", "unknown function '" + call.function + "'", {call.function});
  if (def->is_primitive()) {
    out.push_back(call);
    return;
  }
  for (const auto& step : instantiate(*def, call.args).calls) expand(step, api, depth + 1, out);
}

}  // namespace

bool is_object_id(std::string_view text) {
  if (text.empty() || !is_upper(text.front())) return false;
  return std::all_of(text.begin(), text.end(), [](char c) { return is_upper(c) || is_digit(c) || c == '_'; });
}

bool is_param_name(std::string_view text) {
  if (text.empty() || !is_lower(text.front())) return false;
  return std::all_of(text.begin(), text.end(), [](char c) { return is_lower(c) || is_digit(c) || c == '_'; });
}

// Function names may be camelCase (users name things like putInBag) but must
// not look like object ids.
bool is_function_name(std::string_view text) {
  if (text.empty() || !(is_lower(text.front()) || text.front() == '_')) return false;
  return std::all_of(text.begin(), text.end(), is_ident_char);
}

Catalog::Catalog(std::vector<ObjectRef> objects) : objects_(std::move(objects)) {
  std::set<std::string> seen;
  for (const auto& obj : objects_) {
    if (!is_object_id(obj.id)) throw Error("InvalidScene", "invalid object id '" + obj.id + "'");
    if (!seen.insert(obj.id).second) throw Error("InvalidScene", "duplicate object id '" + obj.id + "'");
    if (obj.aliases.empty()) throw Error("InvalidScene", "object '" + obj.id + "' has no aliases");
    for (const auto& alias : obj.aliases) {
      const bool lowercase = !alias.empty() && std::none_of(alias.begin(), alias.end(), is_upper);
      if (!lowercase) throw Error("InvalidScene", "alias '" + alias + "' of '" + obj.id + "' must be lowercase");
    }
  }
}

const ObjectRef* Catalog::find(std::string_view id) const {
  for (const auto& obj : objects_) {
    if (obj.id == id) return &obj;
  }
  return nullptr;
}

std::vector<std::string> Catalog::ids() const {
  std::vector<std::string> out;
  out.reserve(objects_.size());
  for (const auto& obj : objects_) out.push_back(obj.id);
  return out;
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::Base:
      return "base";
    case Provenance::TaughtMeta:
      return "taught-meta";
    case Provenance::TaughtLive:
      return "taught-live";
  }
  return "taught-meta";
}

Provenance provenance_from_string(std::string_view text) {
  if (text == "base") return Provenance::Base;
  if (text == "taught-live") return Provenance::TaughtLive;
  if (text == "taught-meta") return Provenance::TaughtMeta;
  throw Error("SchemaError", "unknown provenance '" + std::string(text) + "'");
}

bool is_base_name(std::string_view name) {
  return std::find(kBaseNames.begin(), kBaseNames.end(), name) != kBaseNames.end();
}

Api::Api() {
  const ParamSpec obj{"obj", ParamKind::ObjectRef, "object to act on"};
  entries_ = {
      primitive("goto", {obj}, "Move the gripper to hover above the given object."),
      primitive("pickup", {obj}, "Move to the given object, grasp it and lift it."),
      primitive("release", {}, "Open the gripper and let go of the held object."),
      primitive("open_gripper", {}, "Open the gripper."),
      primitive("close_gripper", {}, "Close the gripper."),
  };
}

const FunctionDef* Api::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name() == name) return &e;
  }
  return nullptr;
}

std::vector<FunctionDef> Api::taught() const {
  return {entries_.begin() + static_cast<std::ptrdiff_t>(kBaseNames.size()), entries_.end()};
}

Plan parse_plan_syntax(std::string_view text) {
  Plan plan;
  for (const auto& t : Parser(text, false).parse_sequence()) plan.calls.push_back(to_call(t));
  return plan;
}

Plan parse_plan(std::string_view text, const Api& api, const Catalog& objects) {
  Plan plan = parse_plan_syntax(text);
  validate_plan(plan, api, objects);
  return plan;
}

void validate_plan(const Plan& plan, const Api& api, const Catalog& objects) {
  for (const auto& call : plan.calls) {
    const FunctionDef* def = api.find(call.function);
    if (def == nullptr) throw Error("UnknownFunction", "unknown function '" + call.function + "'", {call.function});
    if (call.args.size() != def->signature.arity())
      throw Error("ArityMismatch", "'" + call.function + "' expects " + std::to_string(def->signature.arity()) +
                                       " argument(s), got " + std::to_string(call.args.size()),
                  {call.function});
    for (const auto& arg : call.args) {
      if (!objects.contains(arg)) throw Error("UnknownObject", "unknown object '" + arg + "'", {arg});
    }
  }
}

std::string render_call(const Call& call) {
  std::string out = call.function + "(";
  for (std::size_t i = 0; i < call.args.size(); ++i) {
    if (i > 0) out += ", ";
    out += call.args[i];
  }
  return out + ")";
}

std::string render_plan(const Plan& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.calls.size(); ++i) {
    if (i > 0) out += "; ";
    out += render_call(plan.calls[i]);
  }
  return out;
}

TemplateCall parse_template_call(std::string_view text) { return Parser(text, true).parse_single(); }

BodyTemplate parse_body(std::string_view text) { return BodyTemplate{Parser(text, true).parse_sequence()}; }

std::string render_template_call(const TemplateCall& call) {
  std::string out = call.function + "(";
  for (std::size_t i = 0; i < call.args.size(); ++i) {
    if (i > 0) out += ", ";
    if (call.args[i].is_param()) out += "$";
    out += call.args[i].value;
  }
  return out + ")";
}

std::string render_body(const BodyTemplate& body) {
  std::string out;
  for (std::size_t i = 0; i < body.steps.size(); ++i) {
    if (i > 0) out += "; ";
    out += render_template_call(body.steps[i]);
  }
  return out;
}

std::vector<std::string> referencing_functions(const Api& api, std::string_view name) {
  std::vector<std::string> out;
  for (const auto& e : api.entries()) {
    if (e.is_primitive() || e.name() == name) continue;
    const bool refs = std::any_of(e.body->steps.begin(), e.body->steps.end(),
                                  [&](const TemplateCall& s) { return s.function == name; });
    if (refs) out.push_back(e.name());
  }
  return out;
}

Api register_function(const Api& api, FunctionDef def) {
  if (api.contains(def.name())) throw Error("DuplicateName", "'" + def.name() + "' is already defined", {def.name()});
  check_definition(def, api.entries_);
  Api out = api;
  out.entries_.push_back(std::move(def));
  return out;
}

Api update_function(const Api& api, std::string_view name, FunctionDef def) {
  const auto at = index_of(api.entries_, name);
  if (at == api.entries_.size()) throw Error("NotFound", "no function named '" + std::string(name) + "'");
  if (api.entries_[at].is_primitive())
    throw Error("BasePrimitiveImmutable", "'" + std::string(name) + "' is a base primitive");
  if (def.name() != name && api.contains(def.name()))
    throw Error("DuplicateName", "'" + def.name() + "' is already defined", {def.name()});

  const std::vector<FunctionDef> visible(api.entries_.begin(), api.entries_.begin() + static_cast<std::ptrdiff_t>(at));
  check_definition(def, visible);

  const auto callers = referencing_functions(api, name);
  const bool compatible = def.name() == name && def.signature.arity() == api.entries_[at].signature.arity();
  if (!callers.empty() && !compatible)
    throw Error("ReferencedByOthers", "'" + std::string(name) + "' is used by other functions", callers);

  Api out = api;
  out.entries_[at] = std::move(def);
  return out;
}

Api remove_function(const Api& api, std::string_view name) {
  const auto at = index_of(api.entries_, name);
  if (at == api.entries_.size()) throw Error("NotFound", "no function named '" + std::string(name) + "'");
  if (api.entries_[at].is_primitive())
    throw Error("BasePrimitiveImmutable", "'" + std::string(name) + "' is a base primitive");
  const auto callers = referencing_functions(api, name);
  if (!callers.empty()) throw Error("ReferencedByOthers", "'" + std::string(name) + "' is used by other functions", callers);
  Api out = api;
  out.entries_.erase(out.entries_.begin() + static_cast<std::ptrdiff_t>(at));
  return out;
}

void validate_body_objects(const FunctionDef& def, const Catalog& objects) {
  if (!def.body) return;
  for (const auto& step : def.body->steps) {
    for (const auto& arg : step.args) {
      if (!arg.is_param() && !objects.contains(arg.value))
        throw Error("UnknownObject", "unknown object '" + arg.value + "' in body of '" + def.name() + "'", {arg.value});
    }
  }
}

Plan instantiate(const FunctionDef& def, const std::vector<std::string>& args) {
  if (!def.body) return Plan{{Call{def.name(), args}}};
  if (args.size() != def.signature.arity())
    throw Error("ArityMismatch", "'" + def.name() + "' expects " + std::to_string(def.signature.arity()) +
                                     " argument(s), got " + std::to_string(args.size()));
  Plan out;
  for (const auto& step : def.body->steps) {
    Call call{step.function, {}};
    for (const auto& arg : step.args) {
      if (!arg.is_param()) {
        call.args.push_back(arg.value);
        continue;
      }
      std::size_t i = 0;
      while (def.signature.params[i].name != arg.value) ++i;
      call.args.push_back(args[i]);
    }
    out.calls.push_back(std::move(call));
  }
  return out;
}

Plan inline_plan(const Plan& plan, const Api& api) {
  Plan out;
  for (const auto& call : plan.calls) expand(call, api, 0, out.calls);
  return out;
}

nlohmann::json function_to_json(const FunctionDef& def) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : def.signature.params) {
    params.push_back({{"name", p.name}, {"kind", "object-ref"}, {"description", p.description}});
  }
  nlohmann::json body = nlohmann::json::array();
  if (def.body) {
    for (const auto& step : def.body->steps) body.push_back(render_template_call(step));
  }
  return {{"name", def.name()},
          {"doc", def.signature.doc},
          {"params", params},
          {"body", body},
          {"provenance", std::string(to_string(def.signature.provenance))}};
}

FunctionDef function_from_json(const nlohmann::json& json) {
  try {
    FunctionDef def;
    def.signature.name = json.at("name").get<std::string>();
    def.signature.doc = json.value("doc", "");
    def.signature.provenance = provenance_from_string(json.value("provenance", "taught-meta"));
    for (const auto& p : json.value("params", nlohmann::json::array())) {
      if (p.value("kind", "object-ref") != "object-ref")
        throw Error("SchemaError", "unsupported parameter kind '" + p.value("kind", "") + "'");
      def.signature.params.push_back(
          ParamSpec{p.at("name").get<std::string>(), ParamKind::ObjectRef, p.value("description", "")});
    }
    BodyTemplate body;
    for (const auto& step : json.at("body")) body.steps.push_back(parse_template_call(step.get<std::string>()));
    def.body = std::move(body);
    return def;
  } catch (const nlohmann::json::exception& e) {
    throw Error("SchemaError", std::string("malformed function entry: ") + e.what());
  }
}

nlohmann::json api_to_json(const Api& api) {
  nlohmann::json functions = nlohmann::json::array();
  for (const auto& def : api.taught()) functions.push_back(function_to_json(def));
  return {{"version", 1}, {"functions", functions}};
}

Api api_from_json(const nlohmann::json& json, const Catalog* objects) {
  if (!json.is_object() || json.value("version", 0) != 1)
    throw Error("SchemaVersionMismatch", "expected context version 1");
  Api api;
  for (const auto& entry : json.value("functions", nlohmann::json::array())) {
    FunctionDef def = function_from_json(entry);
    if (objects != nullptr) validate_body_objects(def, *objects);
    api = register_function(api, std::move(def));
  }
  return api;
}

}  // namespace provox
