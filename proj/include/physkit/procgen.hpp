#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "physkit/asset.hpp"
#include "physkit/kinematics.hpp"

namespace physkit {

struct AttachmentRegion {
  int base_part_id = 0;
  Vec3 centroid = Vec3::Zero();
  /// Columns: major in-plane axis, minor in-plane axis, outward normal.
  Eigen::Matrix3d frame = Eigen::Matrix3d::Identity();
  Vec3 extent = Vec3::Zero();
  double area = 0.0;

  Vec3 normal() const { return frame.col(2); }
};

/// Contact of a donor component with the rest of its donor asset.
struct DonorContact {
  std::vector<int> component_parts;
  int root_part = 0;
  int donor_parent = 0;
  Vec3 centroid = Vec3::Zero();
  Eigen::Matrix3d frame = Eigen::Matrix3d::Identity();  // normal points parent -> component
  Vec3 extent = Vec3::Zero();
};

struct PlanTransform {
  /// Scale along the donor contact frame axes.
  Vec3 scale = Vec3::Ones();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d donor_frame = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  /// rotation * donor_frame * diag(scale) * donor_frame^T
  Eigen::Matrix3d linear() const;
  Vec3 apply(const Vec3& p) const { return linear() * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return (linear() * d).normalized(); }
};

struct GenPlan {
  std::string base_asset_id;
  std::string component_asset_id;
  int component_root_part = 0;
  std::vector<int> component_parts;
  /// Base parts removed before grafting (intra-category swaps), base numbering.
  std::vector<int> removed_base_parts;
  AttachmentRegion region;
  PlanTransform transform;
};

struct ProcgenConfig {
  double normal_tolerance_deg = 15.0;
  double min_region_area = 0.05;
  double coplanar_angle_deg = 1.0;
  double coplanar_offset = 0.01;
  double scale_min = 0.3;
  double scale_max = 3.0;
  double max_protrusion = 0.05;
  int designated_base_part = 1;
  std::vector<std::string> donor_categories = {"drawer", "door"};
  std::vector<std::string> categories = {"cabinet", "bottle", "faucet", "chair", "oven",
                                         "shower",  "knife",  "table",  "laptop"};
  KinematicsConfig kinematics;
};

/// Component = root part, every part transitively attached to it as a joint
/// child, and rigid attachments: parts without a joint of their own that touch
/// a member (within tau) but not the root's parent.
std::vector<int> component_parts(const ObjectAsset& donor, int root_part, const KinematicsConfig& config = {});

/// Root part of the donor's movable component: the child of its first B/C/D/CB constraint.
int default_component_root(const ObjectAsset& donor);

DonorContact donor_contact(const ObjectAsset& donor, const std::vector<int>& component, const ProcgenConfig& config = {});

/// Largest planar face group on the designated base part whose outward normal
/// is within the tolerance of the donor contact normal.
AttachmentRegion find_attachment_region(const ObjectAsset& base, int base_part, const DonorContact& contact,
                                        const ProcgenConfig& config = {});
AttachmentRegion find_attachment_region(const ObjectAsset& base, const ObjectAsset& donor,
                                        const std::vector<int>& donor_component, const ProcgenConfig& config = {});

/// Rotation closest to identity among the four in-plane axis assignments;
/// per-axis scale from extents, clamped. The world axis closest to the mapped
/// `opening_direction` (donor coordinates; region normal when absent) is exempt
/// from the protrusion limit against `base_bounds`.
PlanTransform fit_component(const AttachmentRegion& region, const DonorContact& contact,
                            const TriangleMesh& component_mesh, const Aabb& base_bounds,
                            const std::optional<Vec3>& opening_direction, const ProcgenConfig& config = {});

ObjectAsset compose(const ObjectAsset& base, const ObjectAsset& component_donor, const GenPlan& plan);

enum class ProcgenMode { Intra, Cross };
std::optional<ProcgenMode> parse_procgen_mode(const std::string& text);
std::string_view to_string(ProcgenMode mode);

/// Base with the given parts removed; remaining parts renumbered from 1.
ObjectAsset remove_parts(const ObjectAsset& base, const std::vector<int>& removed);

/// Builds a full plan for one (base, donor) pair; throws NoCompatibleRegion or ScaleOutOfBounds.
GenPlan make_plan(const ObjectAsset& base, const std::string& base_id, const ObjectAsset& donor,
                  const std::string& donor_id, ProcgenMode mode, const ProcgenConfig& config = {});
GenPlan make_plan(const ObjectAsset& base, const std::string& base_id, const ObjectAsset& donor,
                  const std::string& donor_id, const DonorContact& contact, ProcgenMode mode,
                  const ProcgenConfig& config = {});

struct NamedAsset {
  std::string id;
  const ObjectAsset* asset;
};

struct PlanStats {
  std::size_t considered = 0;
  std::size_t produced = 0;
  std::size_t skipped = 0;
};

/// Streams compatible plans in (base, donor) order; returns counts.
PlanStats enumerate_plans(const std::vector<NamedAsset>& bases, const std::vector<NamedAsset>& components,
                          ProcgenMode mode, const std::function<void(const GenPlan&)>& sink,
                          const ProcgenConfig& config = {});

nlohmann::json plan_to_json(const GenPlan& plan);

}  // namespace physkit
