#pragma once

// The output of meta-prompting: a goal plus the personalized API.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "provox/dsl.hpp"

namespace provox {

struct UserContext {
  std::string goal;
  Api api;

  friend bool operator==(const UserContext&, const UserContext&) = default;
};

// {"version": 1, "goal": ..., "functions": [...]}
nlohmann::json context_to_json(const UserContext& context);
// Errors: SchemaVersionMismatch, SchemaError, UnknownObject (when a catalog
// is given) and any registration error of the listed functions.
UserContext context_from_json(const nlohmann::json& json, const Catalog* objects = nullptr);
UserContext load_context_file(const std::filesystem::path& path, const Catalog* objects = nullptr);

}  // namespace provox
