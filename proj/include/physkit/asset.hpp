#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace physkit {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return lo.x() > hi.x(); }
  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& other) {
    if (other.empty()) return;
    extend(other.lo);
    extend(other.hi);
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 size() const { return hi - lo; }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  double face_area(std::size_t f) const;
  /// Unnormalized (length = 2 * area) geometric normal following the winding.
  Vec3 face_cross(std::size_t f) const;
  Vec3 face_centroid(std::size_t f) const;
  double area() const;
  Aabb bounds() const;
  void append(const TriangleMesh& other);

  bool operator==(const TriangleMesh&) const = default;
};

/// Young's modulus in GPa, density in g/cm^3.
struct MaterialSpec {
  std::string name;
  double youngs_modulus = 0.0;
  double poisson_ratio = 0.0;
  double density = 0.0;

  bool operator==(const MaterialSpec&) const = default;
};

struct DescriptionSet {
  std::string basic;
  std::string functional;
  std::string kinematic;
  std::string grasped;

  bool complete() const {
    return !basic.empty() && !functional.empty() && !kinematic.empty() && !grasped.empty();
  }
  bool operator==(const DescriptionSet&) const = default;
};

struct Part {
  int id = 0;
  std::string name;
  TriangleMesh mesh;
  MaterialSpec material;
  int affordance_rank = 1;  // 1 = most likely to be touched
  DescriptionSet descriptions;

  bool operator==(const Part&) const = default;
};

// Numeric codes are part of the packed 14-channel layout; do not reorder.
enum class KinematicKind : std::uint8_t { A = 0, B = 1, C = 2, D = 3, E = 4, CB = 5 };

inline constexpr std::array<KinematicKind, 6> kAllKinds = {
    KinematicKind::A, KinematicKind::B, KinematicKind::C,
    KinematicKind::D, KinematicKind::E, KinematicKind::CB};

std::string_view to_string(KinematicKind kind);
std::optional<KinematicKind> parse_kind(std::string_view text);
inline int kind_code(KinematicKind kind) { return static_cast<int>(kind); }

inline bool has_parent_child(KinematicKind k) {
  return k == KinematicKind::B || k == KinematicKind::C || k == KinematicKind::D ||
         k == KinematicKind::CB;
}
inline bool requires_direction(KinematicKind k) {
  return k == KinematicKind::B || k == KinematicKind::C || k == KinematicKind::CB;
}
inline bool requires_pivot(KinematicKind k) {
  return k == KinematicKind::C || k == KinematicKind::D || k == KinematicKind::CB;
}
inline bool is_rotational(KinematicKind k) {
  return k == KinematicKind::C || k == KinematicKind::D || k == KinematicKind::CB;
}

/// Translation ranges are in normalized units, rotation ranges in radians.
struct MotionRange {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const MotionRange&) const = default;
};

struct KinematicConstraint {
  KinematicKind kind = KinematicKind::E;
  std::optional<int> parent_part;
  std::optional<int> child_part;
  std::optional<Vec3> direction;
  std::optional<Vec3> pivot;
  std::optional<MotionRange> range;
  bool finalized = false;

  bool operator==(const KinematicConstraint&) const = default;
};

struct AbsoluteScale {
  double length_cm = 1.0;
  double width_cm = 1.0;
  double height_cm = 1.0;

  double max_dim() const;
  bool operator==(const AbsoluteScale&) const = default;
};

struct ObjectAsset {
  std::string object_name;
  std::string category;
  AbsoluteScale absolute_scale;
  std::vector<Part> parts;
  std::vector<KinematicConstraint> constraints;
  std::string provenance;

  const Part* find_part(int id) const;
  Part* find_part(int id);
  Aabb bounds() const;
  /// Constraint in which `part_id` is the child, if any.
  const KinematicConstraint* constraint_for_child(int part_id) const;

  bool operator==(const ObjectAsset&) const = default;
};

}  // namespace physkit
