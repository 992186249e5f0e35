#include "physkit/procgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <queue>
#include <set>

#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/geometry.hpp"
#include "physkit/nearest.hpp"
#include "physkit/rng.hpp"
#include "physkit/validate.hpp"

namespace physkit {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

const KinematicConstraint* constraint_with_child(const ObjectAsset& asset, int child) {
  for (const auto& c : asset.constraints) {
    if (c.child_part && *c.child_part == child && has_parent_child(c.kind)) return &c;
  }
  return nullptr;
}

TriangleMesh union_mesh(const ObjectAsset& asset, const std::vector<int>& parts) {
  TriangleMesh mesh;
  for (int id : parts) {
    const Part* p = asset.find_part(id);
    if (!p) throw Error(Errc::UnknownPart, "no part with id " + std::to_string(id));
    mesh.append(p->mesh);
  }
  return mesh;
}

// cos(1 deg): normals this close to a world axis count as axis-aligned.
constexpr double kAxisSnapCos = 0.9998476951563913;

/// Right-handed frame [major, normal x major, normal].
Eigen::Matrix3d make_frame(const Vec3& normal, const Vec3& major_hint) {
  const Vec3 n = normal.normalized();
  Vec3 major = major_hint - major_hint.dot(n) * n;
  if (major.norm() < 1e-9) {
    // Hint parallel to the normal: fall back to the world axis least aligned with it.
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
      if (std::abs(n[a]) < std::abs(n[axis])) axis = a;
    }
    major = Vec3::Unit(axis) - n[axis] * n;
  }
  // Axis-aligned planes: snap to the nearest in-plane world axis. The principal
  // axis of a near-square patch is arbitrary and would skew extents.
  for (int k = 0; k < 3; ++k) {
    if (std::abs(n[k]) < kAxisSnapCos) continue;
    const int a = (k + 1) % 3, b = (k + 2) % 3;
    const int pick = std::abs(major[a]) >= std::abs(major[b]) ? a : b;
    major = Vec3::Unit(pick) - n[pick] * n;
    break;
  }
  major = canonical_sign(major.normalized());
  Eigen::Matrix3d frame;
  frame.col(0) = major;
  frame.col(1) = n.cross(major).normalized();
  frame.col(2) = n;
  return frame;
}

Vec3 frame_extent(const Eigen::Matrix3d& frame, const std::vector<Vec3>& points) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : points) {
    const Vec3 local = frame.transpose() * p;
    lo = lo.cwiseMin(local);
    hi = hi.cwiseMax(local);
  }
  return hi - lo;
}

Eigen::Matrix3d rot_z(int quarter_turns) {
  Eigen::Matrix3d q = Eigen::Matrix3d::Identity();
  static constexpr std::array<double, 4> c = {1, 0, -1, 0};
  static constexpr std::array<double, 4> s = {0, 1, 0, -1};
  q(0, 0) = c[quarter_turns];
  q(0, 1) = -s[quarter_turns];
  q(1, 0) = s[quarter_turns];
  q(1, 1) = c[quarter_turns];
  return q;
}

std::string welded_key(const Vec3& v) {
  auto r = [](double x) { return static_cast<long long>(std::llround(x * 1e9)); };
  return std::to_string(r(v.x())) + "," + std::to_string(r(v.y())) + "," + std::to_string(r(v.z()));
}

}  // namespace

Eigen::Matrix3d PlanTransform::linear() const {
  return rotation * donor_frame * scale.asDiagonal() * donor_frame.transpose();
}

std::vector<int> component_parts(const ObjectAsset& donor, int root_part, const KinematicsConfig& config) {
  if (!donor.find_part(root_part)) throw Error(Errc::UnknownPart, "no part with id " + std::to_string(root_part));
  const KinematicConstraint* root_joint = constraint_with_child(donor, root_part);
  const std::optional<int> parent = root_joint ? root_joint->parent_part : std::nullopt;

  std::map<int, std::unique_ptr<GridIndex>> indices;
  auto index_of = [&](int id) -> const GridIndex& {
    auto it = indices.find(id);
    if (it == indices.end()) {
      const auto cloud = sample_part(donor, id, 2048, config.seed).points;
      it = indices.emplace(id, std::make_unique<GridIndex>(cloud)).first;
    }
    return *it->second;
  };
  auto touching = [&](int a, int b) {
    const auto cloud = sample_part(donor, a, 2048, config.seed).points;
    const GridIndex& other = index_of(b);
    const double limit = config.tau * config.tau;
    for (const auto& p : cloud) {
      if (other.nearest_sq_bounded(p, limit).first <= limit) return true;
    }
    return false;
  };

  std::set<int> members{root_part};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& c : donor.constraints) {
      if (!c.parent_part || !c.child_part) continue;
      if (members.count(*c.parent_part) && !members.count(*c.child_part)) {
        members.insert(*c.child_part);
        grew = true;
      }
    }
    for (const auto& part : donor.parts) {
      if (members.count(part.id) || (parent && part.id == *parent) || constraint_with_child(donor, part.id)) continue;
      if (parent && touching(part.id, *parent)) continue;
      for (int m : members) {
        if (touching(part.id, m)) {
          members.insert(part.id);
          grew = true;
          break;
        }
      }
    }
  }
  return {members.begin(), members.end()};
}

int default_component_root(const ObjectAsset& donor) {
  for (const auto& c : donor.constraints) {
    if (has_parent_child(c.kind) && c.child_part) return *c.child_part;
  }
  throw Error(Errc::InvalidArgument, "donor '" + donor.object_name + "' has no movable component");
}

DonorContact donor_contact(const ObjectAsset& donor, const std::vector<int>& component, const ProcgenConfig& config) {
  if (component.empty()) throw Error(Errc::InvalidArgument, "empty donor component");
  DonorContact out;
  out.component_parts = component;
  out.root_part = component.front();
  // The root is the member whose parent lies outside the component.
  const KinematicConstraint* root_constraint = nullptr;
  for (int id : component) {
    const KinematicConstraint* c = constraint_with_child(donor, id);
    if (c && std::find(component.begin(), component.end(), *c->parent_part) == component.end()) {
      out.root_part = id;
      root_constraint = c;
      break;
    }
  }
  if (!root_constraint) throw Error(Errc::InvalidArgument, "donor component has no constraint to a parent part");
  out.donor_parent = *root_constraint->parent_part;

  const auto& kc = config.kinematics;
  const TriangleMesh mesh = union_mesh(donor, component);
  const PointCloud comp = surface_sample(mesh, kc.samples_per_part, derive_seed(kc.seed, 0xc0de), out.root_part);
  const PointCloud parent = sample_part(donor, out.donor_parent, kc.samples_per_part, kc.seed);
  const ContactRegion region = contact_region(comp, parent, kc.tau);
  const auto points = region.all_points();
  const FittedPlane plane = fit_plane(points);
  out.centroid = region.centroid();
  Vec3 comp_center = Vec3::Zero();
  for (const auto& p : comp.points) comp_center += p;
  comp_center /= static_cast<double>(comp.points.size());
  Vec3 normal = plane.normal;
  if ((comp_center - out.centroid).dot(normal) < 0.0) normal = -normal;
  out.frame = make_frame(normal, plane.major_axis);
  out.extent = frame_extent(out.frame, points);
  return out;
}

AttachmentRegion find_attachment_region(const ObjectAsset& base, int base_part, const DonorContact& contact,
                                        const ProcgenConfig& config) {
  const Part* part = base.find_part(base_part);
  if (!part) throw Error(Errc::UnknownPart, "base has no part " + std::to_string(base_part));
  const TriangleMesh& mesh = part->mesh;
  const std::size_t nf = mesh.faces.size();

  std::map<std::string, int> weld;
  std::vector<int> vid(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    vid[v] = weld.emplace(welded_key(mesh.vertices[v]), static_cast<int>(weld.size())).first->second;
  }
  std::vector<std::vector<std::size_t>> faces_of(weld.size());
  std::vector<Vec3> normals(nf);
  std::vector<double> areas(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    areas[f] = mesh.face_area(f);
    const Vec3 cross = mesh.face_cross(f);
    normals[f] = areas[f] > 0.0 ? Vec3(cross.normalized()) : Vec3::Zero();
    for (int v : mesh.faces[f]) faces_of[vid[v]].push_back(f);
  }

  const double cos_coplanar = std::cos(config.coplanar_angle_deg * kDegToRad);
  const double cos_match = std::cos(config.normal_tolerance_deg * kDegToRad);
  const Vec3 target = contact.frame.col(2);
  std::vector<bool> seen(nf, false);
  std::vector<std::size_t> best_group;
  double best_area = 0.0;
  Vec3 best_normal = Vec3::Zero();
  for (std::size_t seed = 0; seed < nf; ++seed) {
    if (seen[seed] || areas[seed] <= 0.0) continue;
    const Vec3 n0 = normals[seed];
    const double o0 = n0.dot(mesh.face_centroid(seed));
    std::vector<std::size_t> group;
    std::queue<std::size_t> todo;
    todo.push(seed);
    seen[seed] = true;
    while (!todo.empty()) {
      const std::size_t f = todo.front();
      todo.pop();
      group.push_back(f);
      for (int v : mesh.faces[f]) {
        for (std::size_t g : faces_of[vid[v]]) {
          if (seen[g] || areas[g] <= 0.0) continue;
          if (normals[g].dot(n0) < cos_coplanar) continue;
          if (std::abs(n0.dot(mesh.face_centroid(g)) - o0) > config.coplanar_offset) continue;
          seen[g] = true;
          todo.push(g);
        }
      }
    }
    double area = 0.0;
    Vec3 weighted = Vec3::Zero();
    for (std::size_t f : group) {
      area += areas[f];
      weighted += mesh.face_cross(f);
    }
    const Vec3 normal = weighted.normalized();
    if (normal.dot(target) < cos_match || area < config.min_region_area) continue;
    if (area > best_area) {
      best_area = area;
      best_group = group;
      best_normal = normal;
    }
  }
  if (best_group.empty()) {
    throw Error(Errc::NoCompatibleRegion, "no planar patch of area >= " + std::to_string(config.min_region_area) +
                                              " facing the donor contact on base part " + std::to_string(base_part));
  }

  std::sort(best_group.begin(), best_group.end());
  TriangleMesh patch;
  patch.vertices = mesh.vertices;
  for (std::size_t f : best_group) patch.faces.push_back(mesh.faces[f]);
  AttachmentRegion region;
  region.base_part_id = base_part;
  region.area = best_area;
  Vec3 centroid = Vec3::Zero();
  for (std::size_t f : best_group) centroid += areas[f] * mesh.face_centroid(f);
  region.centroid = centroid / best_area;
  const auto samples = surface_sample(patch, 2048, derive_seed(config.kinematics.seed, 0xa77a)).points;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : samples) {
    const Vec3 d = p - region.centroid;
    cov += d * d.transpose();
  }
  const Eigen::Matrix3d p_plane = Eigen::Matrix3d::Identity() - best_normal * best_normal.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(p_plane * cov * p_plane);
  region.frame = make_frame(best_normal, solver.eigenvectors().col(2));
  std::vector<Vec3> corners;
  for (std::size_t f : best_group) {
    for (int v : mesh.faces[f]) corners.push_back(mesh.vertices[v]);
  }
  region.extent = frame_extent(region.frame, corners);
  return region;
}

AttachmentRegion find_attachment_region(const ObjectAsset& base, const ObjectAsset& donor,
                                        const std::vector<int>& donor_component, const ProcgenConfig& config) {
  return find_attachment_region(base, config.designated_base_part, donor_contact(donor, donor_component, config),
                                config);
}

PlanTransform fit_component(const AttachmentRegion& region, const DonorContact& contact,
                            const TriangleMesh& component_mesh, const Aabb& base_bounds,
                            const std::optional<Vec3>& opening_direction, const ProcgenConfig& config) {
  const Eigen::Matrix3d& fd = contact.frame;
  const Eigen::Matrix3d& fr = region.frame;
  int best_q = 0;
  double best_dev = std::numeric_limits<double>::infinity();
  for (int q = 0; q < 4; ++q) {
    const double dev = (fr * rot_z(q) * fd.transpose() - Eigen::Matrix3d::Identity()).norm();
    if (dev < best_dev - 1e-12) {
      best_dev = dev;
      best_q = q;
    }
  }
  PlanTransform t;
  t.rotation = fr * rot_z(best_q) * fd.transpose();
  t.donor_frame = fd;

  const bool swapped = (best_q % 2) == 1;
  const double r0 = swapped ? region.extent[1] : region.extent[0];
  const double r1 = swapped ? region.extent[0] : region.extent[1];
  if (contact.extent[0] <= 1e-9 || contact.extent[1] <= 1e-9) {
    throw Error(Errc::DegenerateInput, "donor contact has zero in-plane extent");
  }
  const double s0 = r0 / contact.extent[0];
  const double s1 = r1 / contact.extent[1];
  auto out_of_bounds = [&](double s) { return s < config.scale_min || s > config.scale_max; };
  if (out_of_bounds(s0) && out_of_bounds(s1)) {
    throw Error(Errc::ScaleOutOfBounds, "component needs scales (" + std::to_string(s0) + ", " + std::to_string(s1) +
                                            ") outside [" + std::to_string(config.scale_min) + ", " +
                                            std::to_string(config.scale_max) + "]");
  }
  auto clamp = [&](double s) { return std::clamp(s, config.scale_min, config.scale_max); };
  t.scale = Vec3(clamp(s0), clamp(s1), clamp(std::sqrt(clamp(s0) * clamp(s1))));

  auto update_translation = [&]() { t.translation = region.centroid - t.linear() * contact.centroid; };
  update_translation();

  const Vec3 opening_world = opening_direction ? Vec3(t.rotation * opening_direction->normalized()) : region.normal();
  int exempt = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(opening_world[a]) > std::abs(opening_world[exempt])) exempt = a;
  }
  auto protrusion = [&](int axis) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    const Eigen::Matrix3d l = t.linear();
    for (const auto& v : component_mesh.vertices) {
      const double x = (l * v + t.translation)[axis];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    return std::max({base_bounds.lo[axis] - lo, hi - base_bounds.hi[axis], 0.0});
  };
  const Eigen::Matrix3d world_of_donor_axis = t.rotation * fd;
  for (int axis = 0; axis < 3; ++axis) {
    if (axis == exempt || protrusion(axis) <= config.max_protrusion) continue;
    int donor_axis = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(world_of_donor_axis(axis, i)) > std::abs(world_of_donor_axis(axis, donor_axis))) donor_axis = i;
    }
    const double original = t.scale[donor_axis];
    double lo = 0.05, hi = 1.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      t.scale[donor_axis] = original * mid;
      update_translation();
      if (protrusion(axis) <= config.max_protrusion) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    t.scale[donor_axis] = original * lo;
    update_translation();
  }
  return t;
}

ObjectAsset remove_parts(const ObjectAsset& base, const std::vector<int>& removed) {
  if (removed.empty()) return base;
  ObjectAsset out = base;
  out.parts.clear();
  std::map<int, int> remap;
  for (const auto& part : base.parts) {
    if (std::find(removed.begin(), removed.end(), part.id) != removed.end()) continue;
    Part p = part;
    p.id = static_cast<int>(out.parts.size()) + 1;
    remap[part.id] = p.id;
    out.parts.push_back(std::move(p));
  }
  out.constraints.clear();
  for (auto c : base.constraints) {
    if (c.parent_part && !remap.count(*c.parent_part)) continue;
    if (c.child_part && !remap.count(*c.child_part)) continue;
    if (c.parent_part) c.parent_part = remap.at(*c.parent_part);
    if (c.child_part) c.child_part = remap.at(*c.child_part);
    out.constraints.push_back(c);
  }
  return out;
}

ObjectAsset compose(const ObjectAsset& base, const ObjectAsset& donor, const GenPlan& plan) {
  ObjectAsset out = remove_parts(base, plan.removed_base_parts);
  if (!out.find_part(plan.region.base_part_id)) {
    throw Error(Errc::ValidationFailure, "plan region references missing base part " +
                                             std::to_string(plan.region.base_part_id));
  }
  std::map<int, int> remap;
  for (int id : plan.component_parts) {
    const Part* src = donor.find_part(id);
    if (!src) throw Error(Errc::ValidationFailure, "donor has no part " + std::to_string(id));
    Part p = *src;
    p.id = static_cast<int>(out.parts.size()) + 1;
    for (auto& v : p.mesh.vertices) v = plan.transform.apply(v);
    remap[id] = p.id;
    out.parts.push_back(std::move(p));
  }
  const Eigen::Matrix3d linear = plan.transform.linear();
  for (const auto& c : donor.constraints) {
    if (!c.child_part || !remap.count(*c.child_part)) continue;
    KinematicConstraint n = c;
    n.child_part = remap.at(*c.child_part);
    if (c.parent_part) {
      n.parent_part = remap.count(*c.parent_part) ? remap.at(*c.parent_part) : plan.region.base_part_id;
    }
    if (c.direction) n.direction = plan.transform.apply_direction(*c.direction);
    if (c.pivot) n.pivot = plan.transform.apply(*c.pivot);
    if (c.range && c.kind == KinematicKind::B && c.direction) {
      const double stretch = (linear * c.direction->normalized()).norm();
      n.range = MotionRange{c.range->lo * stretch, c.range->hi * stretch};
    }
    out.constraints.push_back(n);
  }
  out.provenance = "procgen:" + plan.base_asset_id + "+" + plan.component_asset_id + "#" +
                   std::to_string(plan.component_root_part);
  out = normalize_object(out);
  const auto violations = validate_asset(out);
  if (!violations.empty()) {
    throw Error(Errc::ValidationFailure, "composed asset is invalid:\n" + format_violations(violations));
  }
  return out;
}

std::optional<ProcgenMode> parse_procgen_mode(const std::string& text) {
  if (text == "intra") return ProcgenMode::Intra;
  if (text == "cross") return ProcgenMode::Cross;
  return std::nullopt;
}

std::string_view to_string(ProcgenMode mode) { return mode == ProcgenMode::Intra ? "intra" : "cross"; }

GenPlan make_plan(const ObjectAsset& base, const std::string& base_id, const ObjectAsset& donor,
                  const std::string& donor_id, const DonorContact& contact, ProcgenMode mode,
                  const ProcgenConfig& config) {
  GenPlan plan;
  plan.base_asset_id = base_id;
  plan.component_asset_id = donor_id;
  plan.component_root_part = contact.root_part;
  plan.component_parts = contact.component_parts;

  int designated = config.designated_base_part;
  if (mode == ProcgenMode::Intra) {
    const Part* root = donor.find_part(contact.root_part);
    const KinematicConstraint* slot = nullptr;
    for (const auto& c : base.constraints) {
      if (!has_parent_child(c.kind) || !c.child_part) continue;
      const Part* child = base.find_part(*c.child_part);
      if (child && root && child->name == root->name) {
        slot = &c;
        break;
      }
    }
    if (!slot) throw Error(Errc::NoCompatibleRegion, "base has no part playing the role of '" + root->name + "'");
    plan.removed_base_parts = component_parts(base, *slot->child_part, config.kinematics);
    designated = *slot->parent_part;
    for (int removed : plan.removed_base_parts) {
      if (removed < *slot->parent_part) --designated;
    }
  }
  const ObjectAsset reduced = remove_parts(base, plan.removed_base_parts);
  plan.region = find_attachment_region(reduced, designated, contact, config);

  std::optional<Vec3> opening;
  if (const KinematicConstraint* c = constraint_with_child(donor, contact.root_part)) {
    if (c->kind == KinematicKind::B && c->direction) opening = c->direction;
  }
  plan.transform = fit_component(plan.region, contact, union_mesh(donor, contact.component_parts), reduced.bounds(),
                                 opening, config);
  return plan;
}

GenPlan make_plan(const ObjectAsset& base, const std::string& base_id, const ObjectAsset& donor,
                  const std::string& donor_id, ProcgenMode mode, const ProcgenConfig& config) {
  const auto component = component_parts(donor, default_component_root(donor), config.kinematics);
  return make_plan(base, base_id, donor, donor_id, donor_contact(donor, component, config), mode, config);
}

PlanStats enumerate_plans(const std::vector<NamedAsset>& bases, const std::vector<NamedAsset>& components,
                          ProcgenMode mode, const std::function<void(const GenPlan&)>& sink,
                          const ProcgenConfig& config) {
  PlanStats stats;
  std::vector<std::optional<DonorContact>> contacts;
  for (const auto& donor : components) {
    const bool eligible =
        mode == ProcgenMode::Intra ||
        std::find(config.donor_categories.begin(), config.donor_categories.end(), donor.asset->category) !=
            config.donor_categories.end();
    std::optional<DonorContact> contact;
    if (eligible) {
      try {
        contact = donor_contact(
            *donor.asset,
            component_parts(*donor.asset, default_component_root(*donor.asset), config.kinematics), config);
      } catch (const Error&) {
        contact.reset();
      }
    }
    contacts.push_back(std::move(contact));
  }
  for (const auto& base : bases) {
    for (std::size_t j = 0; j < components.size(); ++j) {
      ++stats.considered;
      const auto& donor = components[j];
      if (!contacts[j] || (mode == ProcgenMode::Intra && base.asset->category != donor.asset->category)) {
        ++stats.skipped;
        continue;
      }
      try {
        sink(make_plan(*base.asset, base.id, *donor.asset, donor.id, *contacts[j], mode, config));
        ++stats.produced;
      } catch (const Error& e) {
        if (e.code() != Errc::NoCompatibleRegion && e.code() != Errc::ScaleOutOfBounds &&
            e.code() != Errc::DegenerateInput && e.code() != Errc::UnknownPart) {
          throw;
        }
        ++stats.skipped;
      }
    }
  }
  return stats;
}

json plan_to_json(const GenPlan& plan) {
  json region = {
      {"base_part_id", plan.region.base_part_id},
      {"centroid", vec_json(plan.region.centroid)},
      {"frame", mat_json(plan.region.frame)},
      {"extent", vec_json(plan.region.extent)},
      {"area", plan.region.area},
  };
  json transform = {
      {"scale", vec_json(plan.transform.scale)},
      {"rotation", mat_json(plan.transform.rotation)},
      {"donor_frame", mat_json(plan.transform.donor_frame)},
      {"translation", vec_json(plan.transform.translation)},
  };
  return json{
      {"base_asset_id", plan.base_asset_id},
      {"component_asset_id", plan.component_asset_id},
      {"component_root_part", plan.component_root_part},
      {"component_parts", plan.component_parts},
      {"removed_base_parts", plan.removed_base_parts},
      {"region", region},
      {"transform", transform},
  };
}

}  // namespace physkit
