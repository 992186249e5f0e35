#pragma once

#include <optional>
#include <string>
#include <vector>

#include "physkit/asset.hpp"

namespace physkit::fixtures {

// Hand-authored test objects. All are returned normalized; the ground-truth
// joint (when present) is also stored in the asset's constraint list and has
// been carried through normalization.

struct JointTruth {
  KinematicKind kind = KinematicKind::C;
  int child = 0;
  int parent = 0;
  Vec3 direction = Vec3::UnitZ();
  std::optional<Vec3> pivot;
  std::optional<MotionRange> range;
  /// C joints: pivot error is measured to the hinge line; CB and D: to the point.
  bool pivot_on_line = false;
};

struct Fixture {
  std::string name;
  ObjectAsset asset;
  std::optional<JointTruth> truth;
};

Fixture laptop();
Fixture hinged_box();
/// Drawer pulled out by `open` (raw units, housing depth 1.6).
Fixture drawer(double open = 0.4);
Fixture door();
Fixture bottle_cap();
Fixture shower_hose();
/// Closed box shell with a small cube fully inside it.
Fixture hidden_part();
Fixture sphere_base();
Fixture single_cube();
/// Cabinet carcass: 1 bottom, 2 left side, 3 right side, 4 top, 5 back.
Fixture cabinet_base();
/// Solid block with free top and front faces (door donors attach to its front).
Fixture block_base();
/// Housing (1) with drawer body (2), front panel (3), handle (4); closed.
Fixture drawer_donor();
/// Front ring frame (1) with closed door (2) and knob (3).
Fixture door_donor();
/// cabinet_base + drawer_donor composed by procgen (8 parts).
Fixture cabinet_drawer();

/// The six joint-recovery fixtures.
std::vector<Fixture> kinematic_fixtures();
std::vector<std::string> fixture_names();
Fixture by_name(const std::string& name);

/// Parametric sets for the plan-enumeration oracle.
struct BaseSpec {
  bool sphere = false;
  Vec3 dims = Vec3::Ones();  // raw box dimensions (x depth, y width, z height)
};
struct DonorSpec {
  bool door = false;
  Vec3 dims = Vec3::Ones();  // raw component dimensions (drawer body or door slab)
  Vec3 housing = Vec3::Ones();  // raw housing / frame dimensions
};
std::vector<BaseSpec> oracle_base_specs();
std::vector<DonorSpec> oracle_donor_specs();
ObjectAsset make_base(const BaseSpec& spec);
ObjectAsset make_donor(const DonorSpec& spec);

}  // namespace physkit::fixtures
