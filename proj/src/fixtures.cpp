#include "physkit/fixtures.hpp"

#include <cmath>

#include "physkit/error.hpp"
#include "physkit/geometry.hpp"
#include "physkit/primitives.hpp"
#include "physkit/procgen.hpp"

namespace physkit::fixtures {

namespace prim = physkit::primitives;

namespace {

struct MaterialRow {
  const char* name;
  double youngs_gpa;
  double poisson;
  double density;
};

constexpr MaterialRow kWood{"Wood", 11.0, 0.35, 0.7};
constexpr MaterialRow kPlastic{"Plastic", 2.5, 0.38, 1.2};
constexpr MaterialRow kSteel{"Steel", 200.0, 0.29, 7.85};
constexpr MaterialRow kAluminum{"Aluminum", 69.0, 0.33, 2.7};
constexpr MaterialRow kGlass{"Glass", 70.0, 0.22, 2.5};
constexpr MaterialRow kRubber{"Rubber", 0.05, 0.49, 1.1};

Part make_part(int id, const std::string& name, TriangleMesh mesh, const MaterialRow& m, int affordance,
               const std::string& object) {
  Part p;
  p.id = id;
  p.name = name;
  p.mesh = std::move(mesh);
  p.material = MaterialSpec{m.name, m.youngs_gpa, m.poisson, m.density};
  p.affordance_rank = affordance;
  p.descriptions.basic = "The " + name + " of the " + object + ".";
  p.descriptions.functional = "The " + name + " is part of how the " + object + " is used.";
  p.descriptions.kinematic = "The " + name + " moves with its joint or stays fixed to its parent.";
  p.descriptions.grasped = affordance <= 3 ? "Often touched when using the " + object + "."
                                           : "Rarely touched when using the " + object + ".";
  return p;
}

TriangleMesh box(double x0, double y0, double z0, double x1, double y1, double z1) {
  return prim::box(Vec3(x0, y0, z0), Vec3(x1, y1, z1));
}

KinematicConstraint joint(KinematicKind kind, int parent, int child, std::optional<Vec3> direction,
                          std::optional<Vec3> pivot, MotionRange range) {
  KinematicConstraint c;
  c.kind = kind;
  c.parent_part = parent;
  c.child_part = child;
  if (direction) c.direction = direction->normalized();
  c.pivot = pivot;
  c.range = range;
  c.finalized = true;
  return c;
}

ObjectAsset make_asset(const std::string& name, const std::string& category, AbsoluteScale scale,
                       std::vector<Part> parts, std::vector<KinematicConstraint> constraints) {
  ObjectAsset a;
  a.object_name = name;
  a.category = category;
  a.absolute_scale = scale;
  a.parts = std::move(parts);
  a.constraints = std::move(constraints);
  a.provenance = "fixture:" + name;
  return a;
}

/// Normalizes and records the (transformed) first constraint as ground truth.
Fixture finish(const std::string& name, ObjectAsset raw, bool pivot_on_line) {
  Fixture f;
  f.name = name;
  f.asset = normalize_object(raw);
  if (!f.asset.constraints.empty()) {
    const auto& c = f.asset.constraints.front();
    JointTruth t;
    t.kind = c.kind;
    t.child = c.child_part.value_or(0);
    t.parent = c.parent_part.value_or(0);
    t.direction = c.direction.value_or(Vec3::Zero());
    t.pivot = c.pivot;
    t.range = c.range;
    t.pivot_on_line = pivot_on_line;
    f.truth = t;
  }
  return f;
}

constexpr double kHalfPi = 1.5707963267948966;

}  // namespace

Fixture laptop() {
  const std::string obj = "laptop";
  std::vector<Part> parts = {
      make_part(1, "base", box(0, 0, 0, 1.0, 1.4, 0.06), kAluminum, 2, obj),
      make_part(2, "lid", box(0, 0, 0.06, 0.04, 1.4, 1.0), kAluminum, 1, obj),
  };
  return finish("laptop",
                make_asset("Laptop", "laptop", {24.0, 34.0, 23.0}, std::move(parts),
                           {joint(KinematicKind::C, 1, 2, Vec3::UnitY(), Vec3(0.02, 0.7, 0.06), {0.0, 1.9199})}),
                true);
}

Fixture hinged_box() {
  const std::string obj = "box";
  std::vector<Part> parts = {
      make_part(1, "body", box(0, 0, 0, 1.0, 1.0, 0.6), kWood, 4, obj),
      make_part(2, "lid", box(0, 0, 0.6, 1.0, 1.0, 0.66), kWood, 1, obj),
  };
  return finish("hinged_box",
                make_asset("HingedBox", "box", {30.0, 30.0, 20.0}, std::move(parts),
                           {joint(KinematicKind::C, 1, 2, Vec3::UnitY(), Vec3(0.0, 0.5, 0.6), {0.0, kHalfPi})}),
                true);
}

Fixture drawer(double open) {
  const std::string obj = "dresser";
  TriangleMesh housing = prim::merged({
      box(0, 0, 0, 1.6, 1.0, 0.04),       // floor
      box(0, 0, 0.04, 0.04, 1.0, 0.56),   // back
      box(0.04, 0, 0.04, 1.6, 0.04, 0.56),  // left
      box(0.04, 0.96, 0.04, 1.6, 1.0, 0.56),  // right
      box(0, 0, 0.56, 1.6, 1.0, 0.6),     // top
  });
  std::vector<Part> parts = {
      make_part(1, "housing", std::move(housing), kWood, 6, obj),
      make_part(2, "drawer", box(0.04 + open, 0.08, 0.04, 1.6 + open, 0.92, 0.4), kWood, 1, obj),
  };
  return finish("drawer",
                make_asset("Dresser", "cabinet", {80.0, 50.0, 30.0}, std::move(parts),
                           {joint(KinematicKind::B, 1, 2, Vec3::UnitX(), std::nullopt, {-open, 0.0})}),
                false);
}

Fixture door() {
  const std::string obj = "cupboard";
  TriangleMesh carcass = prim::merged({
      box(0, 0, 0, 0.04, 0.8, 1.2),         // back
      box(0.04, 0, 0, 0.6, 0.04, 1.2),      // left
      box(0.04, 0.76, 0, 0.6, 0.8, 1.2),    // right
      box(0.04, 0.04, 1.16, 0.6, 0.76, 1.2),  // top
      box(0.04, 0.04, 0, 0.6, 0.76, 0.04),  // bottom
  });
  std::vector<Part> parts = {
      make_part(1, "carcass", std::move(carcass), kWood, 7, obj),
      // Door opened by 90 degrees about the vertical edge at (0.6, 0).
      make_part(2, "door", box(0.6, -0.04, 0, 1.4, 0, 1.2), kWood, 1, obj),
  };
  return finish("door",
                make_asset("Cupboard", "cabinet", {40.0, 60.0, 90.0}, std::move(parts),
                           {joint(KinematicKind::C, 1, 2, Vec3::UnitZ(), Vec3(0.6, 0.0, 0.6), {0.0, kHalfPi})}),
                true);
}

Fixture bottle_cap() {
  const std::string obj = "bottle";
  TriangleMesh body = prim::merged({
      prim::cylinder(Vec3(0, 0, 0), 0.4, 1.2),
      prim::cylinder(Vec3(0, 0, 1.2), 0.15, 0.3),
  });
  std::vector<Part> parts = {
      make_part(1, "body", std::move(body), kGlass, 2, obj),
      make_part(2, "cap", prim::cylinder(Vec3(0, 0, 1.5), 0.15, 0.15), kPlastic, 1, obj),
  };
  return finish("bottle_cap",
                make_asset("Bottle", "bottle", {8.0, 8.0, 25.0}, std::move(parts),
                           {joint(KinematicKind::CB, 1, 2, Vec3::UnitZ(), Vec3(0, 0, 1.5), {0.0, 12.566370614359172})}),
                false);
}

Fixture shower_hose() {
  const std::string obj = "shower";
  std::vector<Part> parts = {
      make_part(1, "holder", box(-0.2, -0.2, 0, 0.2, 0.2, 0.3), kSteel, 3, obj),
      make_part(2, "hose", prim::cylinder(Vec3(0, 0, -1.2), 0.025, 1.2), kRubber, 1, obj),
  };
  return finish("shower_hose",
                make_asset("Shower", "shower", {15.0, 15.0, 150.0}, std::move(parts),
                           {joint(KinematicKind::D, 1, 2, std::nullopt, Vec3(0, 0, 0), {0.0, kHalfPi})}),
                false);
}

Fixture hidden_part() {
  const std::string obj = "safe";
  std::vector<Part> parts = {
      make_part(1, "shell", box(0, 0, 0, 1, 1, 1), kSteel, 3, obj),
      make_part(2, "core", box(0.4, 0.4, 0.4, 0.6, 0.6, 0.6), kSteel, 9, obj),
  };
  return finish("hidden_part", make_asset("Safe", "safe", {40.0, 40.0, 40.0}, std::move(parts), {}), false);
}

Fixture sphere_base() {
  std::vector<Part> parts = {make_part(1, "ball", prim::uv_sphere(Vec3::Zero(), 1.0), kRubber, 1, "ball")};
  return finish("sphere_base", make_asset("Ball", "ball", {22.0, 22.0, 22.0}, std::move(parts), {}), false);
}

Fixture single_cube() {
  std::vector<Part> parts = {make_part(1, "block", box(-1, -1, -1, 1, 1, 1), kWood, 1, "block")};
  return finish("single_cube", make_asset("Block", "block", {10.0, 10.0, 10.0}, std::move(parts), {}), false);
}

Fixture cabinet_base() {
  const std::string obj = "cabinet";
  std::vector<Part> parts = {
      make_part(1, "bottom", box(0, 0.04, 0, 1.6, 0.96, 0.04), kWood, 8, obj),
      make_part(2, "left_side", box(0, 0, 0, 1.6, 0.04, 1.0), kWood, 6, obj),
      make_part(3, "right_side", box(0, 0.96, 0, 1.6, 1.0, 1.0), kWood, 6, obj),
      make_part(4, "top", box(0, 0.04, 0.96, 1.6, 0.96, 1.0), kWood, 5, obj),
      make_part(5, "back", box(0, 0.04, 0.04, 0.04, 0.96, 0.96), kWood, 10, obj),
  };
  return finish("cabinet_base", make_asset("Cabinet", "cabinet", {60.0, 40.0, 40.0}, std::move(parts), {}), false);
}

Fixture block_base() {
  std::vector<Part> parts = {make_part(1, "block", box(0, 0, 0, 0.6, 1.0, 1.2), kWood, 5, "nightstand")};
  return finish("block_base", make_asset("Nightstand", "cabinet", {30.0, 50.0, 60.0}, std::move(parts), {}), false);
}

Fixture drawer_donor() {
  const std::string obj = "drawer unit";
  TriangleMesh housing = prim::merged({
      box(0, 0, 0, 1.2, 0.8, 0.04),
      box(0, -0.04, 0, 1.2, 0, 0.5),
      box(0, 0.8, 0, 1.2, 0.84, 0.5),
  });
  std::vector<Part> parts = {
      make_part(1, "housing", std::move(housing), kWood, 7, obj),
      make_part(2, "drawer_body", box(0, 0.05, 0.04, 1.2, 0.75, 0.4), kWood, 3, obj),
      make_part(3, "drawer_front", box(1.2, 0.05, 0.08, 1.24, 0.75, 0.4), kWood, 2, obj),
      make_part(4, "drawer_handle", box(1.24, 0.35, 0.2, 1.3, 0.45, 0.24), kSteel, 1, obj),
  };
  return finish("drawer_donor",
                make_asset("DrawerUnit", "drawer", {45.0, 30.0, 18.0}, std::move(parts),
                           {joint(KinematicKind::B, 1, 2, Vec3::UnitX(), std::nullopt, {0.0, 1.0})}),
                false);
}

Fixture door_donor() {
  const std::string obj = "door unit";
  TriangleMesh ring = prim::merged({
      box(0, 0, 0, 0.04, 0.08, 1.2),
      box(0, 0.72, 0, 0.04, 0.8, 1.2),
      box(0, 0.08, 0, 0.04, 0.72, 0.08),
      box(0, 0.08, 1.12, 0.04, 0.72, 1.2),
  });
  std::vector<Part> parts = {
      make_part(1, "frame", std::move(ring), kWood, 8, obj),
      make_part(2, "door_panel", box(0.04, 0, 0, 0.08, 0.8, 1.2), kWood, 2, obj),
      make_part(3, "door_knob", box(0.08, 0.66, 0.58, 0.14, 0.72, 0.64), kSteel, 1, obj),
  };
  return finish("door_donor",
                make_asset("DoorUnit", "door", {3.0, 60.0, 90.0}, std::move(parts),
                           {joint(KinematicKind::C, 1, 2, Vec3::UnitZ(), Vec3(0.06, 0.0, 0.6), {0.0, kHalfPi})}),
                true);
}

Fixture cabinet_drawer() {
  const Fixture base = cabinet_base();
  const Fixture donor = drawer_donor();
  const GenPlan plan = make_plan(base.asset, "cabinet_base", donor.asset, "drawer_donor", ProcgenMode::Cross);
  Fixture f;
  f.name = "cabinet_drawer";
  f.asset = compose(base.asset, donor.asset, plan);
  f.asset.object_name = "CabinetWithDrawer";
  for (const auto& c : f.asset.constraints) {
    if (c.kind != KinematicKind::B) continue;
    JointTruth t;
    t.kind = c.kind;
    t.child = *c.child_part;
    t.parent = *c.parent_part;
    t.direction = *c.direction;
    t.range = c.range;
    f.truth = t;
    break;
  }
  return f;
}

std::vector<Fixture> kinematic_fixtures() {
  return {laptop(), drawer(), door(), bottle_cap(), shower_hose(), cabinet_drawer()};
}

std::vector<std::string> fixture_names() {
  return {"laptop",       "hinged_box",   "drawer",      "door",         "bottle_cap",
          "shower_hose",  "hidden_part",  "sphere_base", "single_cube",  "cabinet_base",
          "block_base",   "drawer_donor", "door_donor",  "cabinet_drawer"};
}

Fixture by_name(const std::string& name) {
  if (name == "laptop") return laptop();
  if (name == "hinged_box") return hinged_box();
  if (name == "drawer") return drawer();
  if (name == "door") return door();
  if (name == "bottle_cap") return bottle_cap();
  if (name == "shower_hose") return shower_hose();
  if (name == "hidden_part") return hidden_part();
  if (name == "sphere_base") return sphere_base();
  if (name == "single_cube") return single_cube();
  if (name == "cabinet_base") return cabinet_base();
  if (name == "block_base") return block_base();
  if (name == "drawer_donor") return drawer_donor();
  if (name == "door_donor") return door_donor();
  if (name == "cabinet_drawer") return cabinet_drawer();
  throw Error(Errc::InvalidArgument, "unknown fixture '" + name + "'");
}

std::vector<BaseSpec> oracle_base_specs() {
  static const double kDepth[] = {1.0, 1.5, 0.6, 2.0, 0.3};
  static const double kWidth[] = {1.0, 0.8, 1.2, 0.25};
  static const double kHeight[] = {0.7, 1.0};
  std::vector<BaseSpec> out;
  for (int i = 0; i < 50; ++i) {
    BaseSpec s;
    if (i % 5 == 4) {
      s.sphere = true;
      s.dims = Vec3::Constant(1.0 + 0.1 * (i / 5));
    } else {
      const int j = i - i / 5;  // index among boxes, 0..39
      s.dims = Vec3(kDepth[j % 5], kWidth[(j / 5) % 4], kHeight[(j / 20) % 2]);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<DonorSpec> oracle_donor_specs() {
  // (component dims, parent plate dims); plates overhang the component by a
  // margin that controls how large the contact is after normalization.
  static const double kSize[] = {1.02, 0.59, 1.76, 0.05, 0.58};
  std::vector<DonorSpec> out;
  for (int i = 0; i < 40; ++i) {
    DonorSpec s;
    s.door = (i % 2) == 1;
    const int j = i / 2;
    const double a = kSize[j % 5];
    const double b = kSize[(j / 5) % 4];
    const double plate = (a < 0.1 && b < 0.3) ? 2.2 : 0.1;
    if (s.door) {
      s.dims = Vec3(0.04, a, b + 0.4);
      s.housing = Vec3(0.04, a + plate, b + 0.4 + plate);
    } else {
      s.dims = Vec3(a + 0.4, b, 0.3);
      s.housing = Vec3(a + 0.4 + plate, b + plate, 0.04);
    }
    out.push_back(s);
  }
  return out;
}

ObjectAsset make_base(const BaseSpec& spec) {
  if (spec.sphere) {
    std::vector<Part> parts = {make_part(1, "shell", prim::uv_sphere(Vec3::Zero(), spec.dims.x()), kPlastic, 2, "orb")};
    return normalize_object(make_asset("Orb", "cabinet", {30.0, 30.0, 30.0}, std::move(parts), {}));
  }
  std::vector<Part> parts = {make_part(1, "carcass", prim::box(Vec3::Zero(), spec.dims), kWood, 5, "unit")};
  return normalize_object(make_asset("Unit", "cabinet", {100 * spec.dims.x(), 100 * spec.dims.y(), 100 * spec.dims.z()},
                                     std::move(parts), {}));
}

ObjectAsset make_donor(const DonorSpec& spec) {
  std::vector<Part> parts;
  std::vector<KinematicConstraint> constraints;
  if (spec.door) {
    // Vertical plate in the y-z plane, door slab on its +x face, centered.
    const Vec3 plate_lo(0, -0.5 * spec.housing.y(), -0.5 * spec.housing.z());
    const Vec3 plate_hi(spec.housing.x(), 0.5 * spec.housing.y(), 0.5 * spec.housing.z());
    const Vec3 door_lo(spec.housing.x(), -0.5 * spec.dims.y(), -0.5 * spec.dims.z());
    const Vec3 door_hi(spec.housing.x() + spec.dims.x(), 0.5 * spec.dims.y(), 0.5 * spec.dims.z());
    parts.push_back(make_part(1, "wall", prim::box(plate_lo, plate_hi), kWood, 9, "door unit"));
    parts.push_back(make_part(2, "door_panel", prim::box(door_lo, door_hi), kWood, 1, "door unit"));
    constraints.push_back(joint(KinematicKind::C, 1, 2, Vec3::UnitZ(),
                                Vec3(door_lo.x() + 0.5 * spec.dims.x(), door_lo.y(), 0.0), {0.0, kHalfPi}));
    return normalize_object(make_asset("DoorUnit", "door", {5.0, 100 * spec.housing.y(), 100 * spec.housing.z()},
                                       std::move(parts), std::move(constraints)));
  }
  const Vec3 plate_lo(-0.5 * spec.housing.x(), -0.5 * spec.housing.y(), 0);
  const Vec3 plate_hi(0.5 * spec.housing.x(), 0.5 * spec.housing.y(), spec.housing.z());
  const Vec3 body_lo(-0.5 * spec.dims.x(), -0.5 * spec.dims.y(), spec.housing.z());
  const Vec3 body_hi(0.5 * spec.dims.x(), 0.5 * spec.dims.y(), spec.housing.z() + spec.dims.z());
  parts.push_back(make_part(1, "runner_plate", prim::box(plate_lo, plate_hi), kWood, 9, "drawer unit"));
  parts.push_back(make_part(2, "drawer_body", prim::box(body_lo, body_hi), kWood, 1, "drawer unit"));
  constraints.push_back(joint(KinematicKind::B, 1, 2, Vec3::UnitX(), std::nullopt, {0.0, 0.8 * spec.dims.x()}));
  return normalize_object(make_asset("DrawerUnit", "drawer", {100 * spec.housing.x(), 100 * spec.housing.y(), 30.0},
                                     std::move(parts), std::move(constraints)));
}

}  // namespace physkit::fixtures
