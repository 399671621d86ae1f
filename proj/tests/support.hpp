#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "provox/dsl.hpp"
#include "provox/sim.hpp"

namespace provox::testing {

inline std::filesystem::path source_path(const std::string& relative) {
  return std::filesystem::path(PROVOX_SOURCE_DIR) / relative;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline SceneSpec lunchbag() { return load_scene_file(source_path("scenes/lunchbag.json")); }
inline SceneSpec grocery() { return load_scene_file(source_path("scenes/grocery.json")); }

inline FunctionDef pack_def(const std::string& container = "LUNCH_BAG") {
  FunctionDef def;
  def.signature.name = "pack";
  def.signature.doc = "Pack a specified object in the lunch bag";
  def.signature.params = {ParamSpec{"obj", ParamKind::ObjectRef, "object such as the Rice Krispies treat"}};
  def.signature.provenance = Provenance::TaughtLive;
  def.body = parse_body("pickup($obj); goto(" + container + "); release()");
  return def;
}

inline Api with_pack() { return register_function(Api(), pack_def()); }

// Golden files are regenerated only on request.
inline bool update_goldens() { return std::getenv("PROVOX_UPDATE_GOLDENS") != nullptr; }

}  // namespace provox::testing
