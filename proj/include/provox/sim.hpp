#pragma once

// Deterministic tabletop world. Objects are points (their centroids); the
// gripper hovers above a target, grasps, and drops into whichever container
// it is above. Every primitive has a fixed or distance-based duration so the
// simulated clock can drive time metrics.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provox/dsl.hpp"

namespace provox {

struct Workspace {
  Vec3 min{-1.0, -1.0, 0.0};
  Vec3 max{1.0, 1.0, 1.0};

  bool contains(const Vec3& p) const;
};

// All kinematic constants are per-scene so they can be tuned from the scene
// file.
struct SimConstants {
  double hover_offset = 0.15;  // m above the target centroid
  double travel_speed = 0.25;  // m/s
  double drop_radius = 0.10;   // horizontal distance for "above a container"
  double min_move_duration = 1.0;
  double grasp_duration = 2.0;
  double release_duration = 1.0;
  double gripper_duration = 1.0;
  Vec3 home{0.0, 0.0, 0.4};
};

struct SceneSpec {
  std::string name;
  Workspace workspace;
  std::vector<ObjectRef> objects;
  SimConstants constants;

  // Throws Error("InvalidScene").
  void validate() const;
  Catalog catalog() const { return Catalog(objects); }
  std::vector<std::string> container_ids() const;
};

SceneSpec scene_from_json(const nlohmann::json& json);
nlohmann::json scene_to_json(const SceneSpec& scene);
SceneSpec load_scene_file(const std::filesystem::path& path);

struct Placement {
  enum class Kind { Free, Inside, Held };

  Kind kind = Kind::Free;
  Vec3 position;          // Free only
  std::string container;  // Inside only

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct Gripper {
  Vec3 position;
  bool open = true;
  std::optional<std::string> holding;

  friend bool operator==(const Gripper&, const Gripper&) = default;
};

struct WorldState {
  std::map<std::string, Placement> objects;
  Gripper gripper;
  double clock = 0.0;

  const Placement& at(const std::string& id) const;
  // Effective centroid: held objects ride with the gripper, contained ones
  // sit at their container.
  Vec3 position_of(const std::string& id) const;
  std::vector<std::string> contents(const std::string& container) const;
  bool is_inside(const std::string& id, const std::string& container) const;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class EventKind { Moved, Grasped, Released, GripperOpened, GripperClosed, Fault };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

struct SimEvent {
  EventKind kind = EventKind::Moved;
  std::string subject;
  double duration = 0.0;
  std::string fault;  // GripperFull, NothingHeld, ObjectInContainer, NotAPrimitive, ...
  std::string detail;

  bool is_fault() const { return kind == EventKind::Fault; }
  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

nlohmann::json event_to_json(const SimEvent& event);
SimEvent event_from_json(const nlohmann::json& json);
nlohmann::json world_to_json(const WorldState& world);

// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string world_hash(const WorldState& world);

struct StepResult {
  WorldState world;
  SimEvent event;
};

struct PlanResult {
  WorldState world;
  std::vector<SimEvent> events;
  Plan executed;  // primitive calls that ran to completion

  bool faulted() const { return !events.empty() && events.back().is_fault(); }
};

class Simulator {
 public:
  // Validates the scene.
  explicit Simulator(SceneSpec scene);

  const SceneSpec& scene() const { return scene_; }
  WorldState initial_state() const;

  // Faults leave the world untouched and come back as a fault event.
  StepResult exec_call(const WorldState& world, const Call& call) const;
  // Inlines, then runs calls until the first fault.
  PlanResult exec_plan(const WorldState& world, const Plan& plan, const Api& api) const;

 private:
  bool is_container(const std::string& id) const;
  double travel_time(const Vec3& from, const Vec3& to) const;
  std::optional<std::string> container_below(const WorldState& world) const;
  void drop_held(WorldState& world) const;

  SceneSpec scene_;
};

// Convenience matching the load_scene operation.
inline WorldState load_scene(const SceneSpec& scene) { return Simulator(scene).initial_state(); }

}  // namespace provox
