#include "provox/context.hpp"

#include <fstream>

namespace provox {

nlohmann::json context_to_json(const UserContext& context) {
  nlohmann::json j = api_to_json(context.api);
  j["goal"] = context.goal;
  return j;
}

UserContext context_from_json(const nlohmann::json& json, const Catalog* objects) {
  if (!json.is_object()) throw Error("SchemaError", "a context file must be a JSON object");
  UserContext context;
  const auto& goal = json.contains("goal") ? json.at("goal") : nlohmann::json("");
  if (!goal.is_string()) throw Error("SchemaError", "context goal must be a string");
  context.goal = goal.get<std::string>();
  context.api = api_from_json(json, objects);
  return context;
}

UserContext load_context_file(const std::filesystem::path& path, const Catalog* objects) {
  std::ifstream in(path);
  if (!in) throw Error("NotFound", "cannot open context file " + path.string());
  auto json = nlohmann::json::parse(in, nullptr, false);
  if (json.is_discarded()) throw Error("SchemaError", path.string() + " is not valid JSON");
  return context_from_json(json, objects);
}

}  // namespace provox
