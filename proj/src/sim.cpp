#include "provox/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>

namespace provox {

namespace {

Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("InvalidScene", "positions must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json vec_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

double horizontal_distance(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.y - b.y); }

SimEvent fault(std::string code, std::string subject, std::string detail) {
  return SimEvent{EventKind::Fault, std::move(subject), 0.0, std::move(code), std::move(detail)};
}

}  // namespace

bool Workspace::contains(const Vec3& p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
}

void SceneSpec::validate() const {
  (void)catalog();
  for (const auto& obj : objects) {
    if (!workspace.contains(obj.position))
      throw Error("InvalidScene", "object '" + obj.id + "' lies outside the workspace");
  }
  const auto& c = constants;
  if (c.travel_speed <= 0 || c.min_move_duration <= 0 || c.grasp_duration <= 0 || c.release_duration <= 0 ||
      c.gripper_duration <= 0 || c.drop_radius <= 0)
    throw Error("InvalidScene", "scene constants must be positive");
}

std::vector<std::string> SceneSpec::container_ids() const {
  std::vector<std::string> out;
  for (const auto& obj : objects) {
    if (obj.is_container) out.push_back(obj.id);
  }
  return out;
}

SceneSpec scene_from_json(const nlohmann::json& json) {
  try {
    SceneSpec scene;
    scene.name = json.value("name", "");
    if (json.contains("workspace")) {
      const auto& ws = json.at("workspace");
      scene.workspace.min = vec_from_json(ws.at("min"));
      scene.workspace.max = vec_from_json(ws.at("max"));
    }
    for (const auto& o : json.at("objects")) {
      ObjectRef obj;
      obj.id = o.at("id").get<std::string>();
      obj.display_name = o.value("display_name", obj.id);
      obj.aliases = o.value("aliases", std::vector<std::string>{});
      obj.position = vec_from_json(o.at("position"));
      obj.is_container = o.value("container", false);
      scene.objects.push_back(std::move(obj));
    }
    // Scenes may also list containers separately; every entry must be an object.
    for (const auto& id : json.value("containers", std::vector<std::string>{})) {
      auto it = std::find_if(scene.objects.begin(), scene.objects.end(), [&](const ObjectRef& o) { return o.id == id; });
      if (it == scene.objects.end()) throw Error("InvalidScene", "container '" + id + "' is not a scene object");
      it->is_container = true;
    }
    if (json.contains("constants")) {
      const auto& k = json.at("constants");
      auto& c = scene.constants;
      c.hover_offset = k.value("hover_offset", c.hover_offset);
      c.travel_speed = k.value("travel_speed", c.travel_speed);
      c.drop_radius = k.value("drop_radius", c.drop_radius);
      c.min_move_duration = k.value("min_move_duration", c.min_move_duration);
      c.grasp_duration = k.value("grasp_duration", c.grasp_duration);
      c.release_duration = k.value("release_duration", c.release_duration);
      c.gripper_duration = k.value("gripper_duration", c.gripper_duration);
      if (k.contains("home")) c.home = vec_from_json(k.at("home"));
    }
    scene.validate();
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw Error("InvalidScene", std::string("malformed scene: ") + e.what());
  }
}

nlohmann::json scene_to_json(const SceneSpec& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"id", o.id},
                       {"display_name", o.display_name},
                       {"aliases", o.aliases},
                       {"position", vec_to_json(o.position)},
                       {"container", o.is_container}});
  }
  const auto& c = scene.constants;
  return {{"name", scene.name},
          {"workspace", {{"min", vec_to_json(scene.workspace.min)}, {"max", vec_to_json(scene.workspace.max)}}},
          {"objects", objects},
          {"constants",
           {{"hover_offset", c.hover_offset},
            {"travel_speed", c.travel_speed},
            {"drop_radius", c.drop_radius},
            {"min_move_duration", c.min_move_duration},
            {"grasp_duration", c.grasp_duration},
            {"release_duration", c.release_duration},
            {"gripper_duration", c.gripper_duration},
            {"home", vec_to_json(c.home)}}}};
}

SceneSpec load_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("InvalidScene", "cannot open scene file " + path.string());
  nlohmann::json json;
  try {
    in >> json;
  } catch (const nlohmann::json::exception& e) {
    throw Error("InvalidScene", "cannot parse " + path.string() + ": " + e.what());
  }
  return scene_from_json(json);
}

const Placement& WorldState::at(const std::string& id) const {
  auto it = objects.find(id);
  if (it == objects.end()) throw Error("UnknownObject", "unknown object '" + id + "'", {id});
  return it->second;
}

Vec3 WorldState::position_of(const std::string& id) const {
  const Placement* p = &at(id);
  // Containers can nest; the chain is finite because nothing contains itself.
  for (std::size_t guard = 0; guard <= objects.size(); ++guard) {
    switch (p->kind) {
      case Placement::Kind::Free:
        return p->position;
      case Placement::Kind::Held:
        return gripper.position;
      case Placement::Kind::Inside:
        p = &at(p->container);
        break;
    }
  }
  throw Error("InternalError", "containment cycle at '" + id + "'");
}

std::vector<std::string> WorldState::contents(const std::string& container) const {
  std::vector<std::string> out;
  for (const auto& [id, p] : objects) {
    if (p.kind == Placement::Kind::Inside && p.container == container) out.push_back(id);
  }
  return out;
}

bool WorldState::is_inside(const std::string& id, const std::string& container) const {
  const auto& p = at(id);
  return p.kind == Placement::Kind::Inside && p.container == container;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Moved:
      return "moved";
    case EventKind::Grasped:
      return "grasped";
    case EventKind::Released:
      return "released";
    case EventKind::GripperOpened:
      return "gripper_opened";
    case EventKind::GripperClosed:
      return "gripper_closed";
    case EventKind::Fault:
      return "fault";
  }
  return "fault";
}

EventKind event_kind_from_string(std::string_view text) {
  for (auto k : {EventKind::Moved, EventKind::Grasped, EventKind::Released, EventKind::GripperOpened,
                 EventKind::GripperClosed, EventKind::Fault}) {
    if (to_string(k) == text) return k;
  }
  throw Error("SchemaError", "unknown event kind '" + std::string(text) + "'");
}

nlohmann::json event_to_json(const SimEvent& e) {
  nlohmann::json j = {{"kind", std::string(to_string(e.kind))}, {"subject", e.subject}, {"duration", e.duration}};
  if (e.is_fault()) {
    j["fault"] = e.fault;
    j["detail"] = e.detail;
  }
  return j;
}

SimEvent event_from_json(const nlohmann::json& j) {
  SimEvent e;
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.subject = j.value("subject", "");
  e.duration = j.value("duration", 0.0);
  e.fault = j.value("fault", "");
  e.detail = j.value("detail", "");
  return e;
}

nlohmann::json world_to_json(const WorldState& world) {
  nlohmann::json objects = nlohmann::json::object();
  for (const auto& [id, p] : world.objects) {
    switch (p.kind) {
      case Placement::Kind::Free:
        objects[id] = {{"state", "free"}, {"position", vec_to_json(p.position)}};
        break;
      case Placement::Kind::Inside:
        objects[id] = {{"state", "inside"}, {"container", p.container}, {"position", vec_to_json(world.position_of(id))}};
        break;
      case Placement::Kind::Held:
        objects[id] = {{"state", "held"}, {"position", vec_to_json(world.gripper.position)}};
        break;
    }
  }
  return {{"objects", objects},
          {"gripper",
           {{"position", vec_to_json(world.gripper.position)},
            {"open", world.gripper.open},
            {"holding", world.gripper.holding ? nlohmann::json(*world.gripper.holding) : nlohmann::json(nullptr)}}},
          {"clock", world.clock}};
}

std::string world_hash(const WorldState& world) {
  const std::string canonical = world_to_json(world).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Simulator::Simulator(SceneSpec scene) : scene_(std::move(scene)) { scene_.validate(); }

WorldState Simulator::initial_state() const {
  WorldState world;
  for (const auto& obj : scene_.objects) world.objects[obj.id] = Placement{Placement::Kind::Free, obj.position, {}};
  world.gripper.position = scene_.constants.home;
  world.gripper.open = true;
  return world;
}

bool Simulator::is_container(const std::string& id) const {
  return std::any_of(scene_.objects.begin(), scene_.objects.end(),
                     [&](const ObjectRef& o) { return o.id == id && o.is_container; });
}

double Simulator::travel_time(const Vec3& from, const Vec3& to) const {
  return std::max(scene_.constants.min_move_duration, distance(from, to) / scene_.constants.travel_speed);
}

std::optional<std::string> Simulator::container_below(const WorldState& world) const {
  const auto& held = world.gripper.holding;
  std::optional<std::string> best;
  double best_distance = 0.0;
  for (const auto& id : scene_.container_ids()) {
    if (held && *held == id) continue;
    // Skip containers riding inside the held object.
    bool carried = false;
    for (const Placement* p = &world.at(id); p->kind == Placement::Kind::Inside; p = &world.at(p->container)) {
      if (held && p->container == *held) {
        carried = true;
        break;
      }
    }
    if (carried) continue;
    const double d = horizontal_distance(world.gripper.position, world.position_of(id));
    if (d < scene_.constants.drop_radius && (!best || d < best_distance)) {
      best = id;
      best_distance = d;
    }
  }
  return best;
}

void Simulator::drop_held(WorldState& world) const {
  const std::string id = *world.gripper.holding;
  if (auto container = container_below(world)) {
    world.objects[id] = Placement{Placement::Kind::Inside, {}, *container};
  } else {
    const Vec3 ground{world.gripper.position.x, world.gripper.position.y, scene_.workspace.min.z};
    world.objects[id] = Placement{Placement::Kind::Free, ground, {}};
  }
  world.gripper.holding.reset();
  world.gripper.open = true;
}

StepResult Simulator::exec_call(const WorldState& world, const Call& call) const {
  const auto& k = scene_.constants;
  const auto& f = call.function;
  if (!is_base_name(f)) return {world, fault("NotAPrimitive", f, "'" + f + "' must be inlined before execution")};

  const std::size_t arity = (f == "goto" || f == "pickup") ? 1 : 0;
  if (call.args.size() != arity) return {world, fault("ArityMismatch", f, render_call(call))};
  if (arity == 1 && !world.objects.count(call.args[0]))
    return {world, fault("UnknownObject", call.args[0], "no object '" + call.args[0] + "' in the scene")};

  WorldState next = world;
  SimEvent event;
  if (f == "goto") {
    const auto& target = call.args[0];
    Vec3 above = world.position_of(target);
    above.z += k.hover_offset;
    event = {EventKind::Moved, target, travel_time(world.gripper.position, above), {}, {}};
    next.gripper.position = above;
  } else if (f == "pickup") {
    const auto& target = call.args[0];
    if (world.gripper.holding)
      return {world, fault("GripperFull", target, "already holding " + *world.gripper.holding)};
    if (world.at(target).kind == Placement::Kind::Inside)
      return {world, fault("ObjectInContainer", target, target + " is inside " + world.at(target).container)};
    Vec3 above = world.position_of(target);
    above.z += k.hover_offset;
    event = {EventKind::Grasped, target, travel_time(world.gripper.position, above) + k.grasp_duration, {}, {}};
    next.gripper.position = above;
    next.gripper.open = false;
    next.gripper.holding = target;
    next.objects[target] = Placement{Placement::Kind::Held, {}, {}};
  } else if (f == "release") {
    if (!world.gripper.holding) return {world, fault("NothingHeld", "", "release() with an empty gripper")};
    event = {EventKind::Released, *world.gripper.holding, k.release_duration, {}, {}};
    drop_held(next);
  } else if (f == "open_gripper") {
    event = {EventKind::GripperOpened, world.gripper.holding.value_or(""), k.gripper_duration, {}, {}};
    if (next.gripper.holding)
      drop_held(next);
    else
      next.gripper.open = true;
  } else {  // close_gripper
    event = {EventKind::GripperClosed, "", k.gripper_duration, {}, {}};
    next.gripper.open = false;
  }
  next.clock += event.duration;
  return {std::move(next), std::move(event)};
}

PlanResult Simulator::exec_plan(const WorldState& world, const Plan& plan, const Api& api) const {
  PlanResult result{world, {}, {}};
  for (const auto& call : inline_plan(plan, api).calls) {
    auto step = exec_call(result.world, call);
    const bool failed = step.event.is_fault();
    result.events.push_back(std::move(step.event));
    if (failed) break;
    result.world = std::move(step.world);
    result.executed.calls.push_back(call);
  }
  return result;
}

}  // namespace provox
