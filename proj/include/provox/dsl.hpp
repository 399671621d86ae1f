#pragma once

// Skills DSL: object references, function signatures, straight-line plans and
// the API registry they are checked against.
//
// Surface syntax:
//   plan      := [ call { ";" call } [";"] ]
//   call      := name "(" [ arg { "," arg } ] ")"
//   arg       := OBJECT_ID            (plans)
//              | OBJECT_ID | "$" param (body templates)

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "provox/error.hpp"

namespace provox {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct ObjectRef {
  std::string id;            // LUNCH_BAG
  std::string display_name;  // "lunch bag"
  std::vector<std::string> aliases;
  bool is_container = false;
  Vec3 position;

  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
};

bool is_object_id(std::string_view text);
bool is_param_name(std::string_view text);
bool is_function_name(std::string_view text);

// The set of objects a plan may refer to. Built from a scene.
class Catalog {
 public:
  Catalog() = default;
  // Throws Error("InvalidScene") on duplicate ids, malformed ids or bad
  // aliases.
  explicit Catalog(std::vector<ObjectRef> objects);

  const ObjectRef* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  const std::vector<ObjectRef>& objects() const { return objects_; }
  std::vector<std::string> ids() const;
  bool empty() const { return objects_.empty(); }

 private:
  std::vector<ObjectRef> objects_;
};

enum class ParamKind { ObjectRef };

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::ObjectRef;
  std::string description;

  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

enum class Provenance { Base, TaughtMeta, TaughtLive };

std::string_view to_string(Provenance provenance);
Provenance provenance_from_string(std::string_view text);

struct SkillSignature {
  std::string name;
  std::vector<ParamSpec> params;
  std::string doc;
  Provenance provenance = Provenance::TaughtMeta;

  std::size_t arity() const { return params.size(); }
  friend bool operator==(const SkillSignature&, const SkillSignature&) = default;
};

struct Call {
  std::string function;
  std::vector<std::string> args;

  friend bool operator==(const Call&, const Call&) = default;
};

struct Plan {
  std::vector<Call> calls;

  bool empty() const { return calls.empty(); }
  std::size_t size() const { return calls.size(); }
  friend bool operator==(const Plan&, const Plan&) = default;
};

struct TemplateArg {
  enum class Kind { Param, Constant };

  Kind kind = Kind::Constant;
  std::string value;  // parameter name (without '$') or object id

  static TemplateArg param(std::string name) { return {Kind::Param, std::move(name)}; }
  static TemplateArg constant(std::string id) { return {Kind::Constant, std::move(id)}; }
  bool is_param() const { return kind == Kind::Param; }

  friend bool operator==(const TemplateArg&, const TemplateArg&) = default;
};

struct TemplateCall {
  std::string function;
  std::vector<TemplateArg> args;

  friend bool operator==(const TemplateCall&, const TemplateCall&) = default;
};

struct BodyTemplate {
  std::vector<TemplateCall> steps;

  friend bool operator==(const BodyTemplate&, const BodyTemplate&) = default;
};

struct FunctionDef {
  SkillSignature signature;
  std::optional<BodyTemplate> body;  // nullopt marks a base primitive

  const std::string& name() const { return signature.name; }
  bool is_primitive() const { return !body.has_value(); }

  friend bool operator==(const FunctionDef&, const FunctionDef&) = default;
};

inline constexpr std::array<std::string_view, 5> kBaseNames = {
    "goto", "pickup", "release", "open_gripper", "close_gripper"};

bool is_base_name(std::string_view name);

// Registry of base primitives plus taught functions, in registration order.
// Values are immutable; the free functions below return updated copies.
class Api {
 public:
  Api();

  const FunctionDef* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const std::vector<FunctionDef>& entries() const { return entries_; }
  std::vector<FunctionDef> taught() const;
  std::size_t taught_count() const { return entries_.size() - kBaseNames.size(); }

  friend bool operator==(const Api&, const Api&) = default;

 private:
  std::vector<FunctionDef> entries_;

  friend Api register_function(const Api&, FunctionDef);
  friend Api update_function(const Api&, std::string_view, FunctionDef);
  friend Api remove_function(const Api&, std::string_view);
};

// Parses and validates in one step. Errors: SyntaxError, UnknownFunction,
// ArityMismatch, UnknownObject.
Plan parse_plan(std::string_view text, const Api& api, const Catalog& objects);

// Syntax only; no registry checks.
Plan parse_plan_syntax(std::string_view text);

void validate_plan(const Plan& plan, const Api& api, const Catalog& objects);

std::string render_call(const Call& call);
std::string render_plan(const Plan& plan);

TemplateCall parse_template_call(std::string_view text);
BodyTemplate parse_body(std::string_view text);
std::string render_template_call(const TemplateCall& call);
std::string render_body(const BodyTemplate& body);

// Direct callers of `name` among taught entries, in registration order.
std::vector<std::string> referencing_functions(const Api& api, std::string_view name);

Api register_function(const Api& api, FunctionDef def);
Api update_function(const Api& api, std::string_view name, FunctionDef def);
Api remove_function(const Api& api, std::string_view name);

// Every constant in the body must name a catalog object.
void validate_body_objects(const FunctionDef& def, const Catalog& objects);

// Expands taught calls until only base primitives remain (leftmost-innermost).
// Arguments are substituted textually, so placeholder strings such as "$obj"
// survive expansion unchanged.
Plan inline_plan(const Plan& plan, const Api& api);

// Instantiates a body template with concrete arguments.
Plan instantiate(const FunctionDef& def, const std::vector<std::string>& args);

inline constexpr std::size_t kMaxExpansionDepth = 16;

// API export format. Base primitives are never serialized.
nlohmann::json function_to_json(const FunctionDef& def);
FunctionDef function_from_json(const nlohmann::json& json);
nlohmann::json api_to_json(const Api& api);
// Registers the exported functions in order on top of the base API. When a
// catalog is supplied every body constant is checked against it.
Api api_from_json(const nlohmann::json& json, const Catalog* objects = nullptr);

}  // namespace provox
