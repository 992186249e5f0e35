#include "physkit/validate.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

namespace physkit {

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::DuplicatePartId: return "DuplicatePartId";
    case ViolationCode::NonConsecutivePartIds: return "NonConsecutivePartIds";
    case ViolationCode::EmptyMesh: return "EmptyMesh";
    case ViolationCode::InvalidFaceIndex: return "InvalidFaceIndex";
    case ViolationCode::DegenerateFace: return "DegenerateFace";
    case ViolationCode::CoordinateOutOfRange: return "CoordinateOutOfRange";
    case ViolationCode::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ViolationCode::NonPositiveScale: return "NonPositiveScale";
    case ViolationCode::AffordanceOutOfRange: return "AffordanceOutOfRange";
    case ViolationCode::NegativeDensity: return "NegativeDensity";
    case ViolationCode::PoissonOutOfRange: return "PoissonOutOfRange";
    case ViolationCode::NegativeYoungsModulus: return "NegativeYoungsModulus";
    case ViolationCode::DanglingConstraintRef: return "DanglingConstraintRef";
    case ViolationCode::FieldForbiddenForKind: return "FieldForbiddenForKind";
    case ViolationCode::MissingParentChild: return "MissingParentChild";
    case ViolationCode::ParentEqualsChild: return "ParentEqualsChild";
    case ViolationCode::DirectionRequired: return "DirectionRequired";
    case ViolationCode::DirectionNotUnit: return "DirectionNotUnit";
    case ViolationCode::PivotRequired: return "PivotRequired";
    case ViolationCode::PivotForbiddenForPrismatic: return "PivotForbiddenForPrismatic";
    case ViolationCode::RangeInverted: return "RangeInverted";
    case ViolationCode::NonFiniteValue: return "NonFiniteValue";
    case ViolationCode::EmptyDescription: return "EmptyDescription";
  }
  return "Unknown";
}

namespace {

constexpr double kCoordTolerance = 1e-9;
constexpr double kDegenerateArea = 1e-12;
constexpr double kUnitTolerance = 1e-9;

struct Collector {
  std::vector<Violation> out;
  void add(ViolationCode code, std::string path, std::string message) {
    out.push_back({code, std::move(path), std::move(message)});
  }
};

bool finite(const Vec3& v) { return v.allFinite(); }

void check_mesh(const Part& part, const std::string& path, const ValidationOptions& options, Collector& c) {
  const auto& mesh = part.mesh;
  if (mesh.faces.empty()) {
    c.add(ViolationCode::EmptyMesh, path + ".mesh", "part has no faces");
  }
  const int nv = static_cast<int>(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    if (!finite(v)) {
      c.add(ViolationCode::NonFiniteCoordinate, fmt::format("{}.mesh.vertices[{}]", path, i),
            "vertex coordinate is not finite");
      continue;
    }
    if (options.require_normalized && v.cwiseAbs().maxCoeff() > 1.0 + kCoordTolerance) {
      c.add(ViolationCode::CoordinateOutOfRange, fmt::format("{}.mesh.vertices[{}]", path, i),
            fmt::format("coordinate magnitude {} exceeds 1", v.cwiseAbs().maxCoeff()));
      break;  // one report per part is enough
    }
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    bool bad = false;
    for (int idx : t) bad |= idx < 0 || idx >= nv;
    if (bad) {
      c.add(ViolationCode::InvalidFaceIndex, fmt::format("{}.mesh.faces[{}]", path, f),
            "face references a missing vertex");
      continue;
    }
    if (mesh.face_area(f) < kDegenerateArea) {
      c.add(ViolationCode::DegenerateFace, fmt::format("{}.mesh.faces[{}]", path, f), "zero-area face");
    }
  }
}

void check_part(const Part& part, std::size_t index, const ValidationOptions& options, Collector& c) {
  const std::string path = fmt::format("parts[{}]", index);
  check_mesh(part, path, options, c);
  if (part.affordance_rank < 1 || part.affordance_rank > 10) {
    c.add(ViolationCode::AffordanceOutOfRange, path + ".affordance_rank",
          fmt::format("affordance rank {} outside [1, 10]", part.affordance_rank));
  }
  const auto& m = part.material;
  if (!std::isfinite(m.density) || !std::isfinite(m.poisson_ratio) || !std::isfinite(m.youngs_modulus)) {
    c.add(ViolationCode::NonFiniteValue, path + ".material", "material property is not finite");
  } else {
    if (m.density < 0.0) {
      c.add(ViolationCode::NegativeDensity, path + ".material.density", "density must be >= 0");
    }
    if (!(m.poisson_ratio > -1.0 && m.poisson_ratio <= 0.5)) {
      c.add(ViolationCode::PoissonOutOfRange, path + ".material.poisson_ratio",
            fmt::format("Poisson ratio {} outside (-1, 0.5]", m.poisson_ratio));
    }
    if (m.youngs_modulus < 0.0) {
      c.add(ViolationCode::NegativeYoungsModulus, path + ".material.youngs_modulus",
            "Young's modulus must be >= 0");
    }
  }
  if (options.require_descriptions) {
    const auto& d = part.descriptions;
    const std::pair<const std::string*, const char*> fields[] = {
        {&d.basic, "basic"}, {&d.functional, "functional"}, {&d.kinematic, "kinematic"}, {&d.grasped, "grasped"}};
    for (const auto& [text, name] : fields) {
      if (text->empty()) {
        c.add(ViolationCode::EmptyDescription, fmt::format("{}.descriptions.{}", path, name),
              "description must be non-empty for an approved asset");
      }
    }
  }
}

void check_constraint(const KinematicConstraint& k, const std::string& path, Collector& c) {
  const bool movable = has_parent_child(k.kind);
  if (!movable) {
    if (k.parent_part) c.add(ViolationCode::FieldForbiddenForKind, path + ".parent_part", "A/E joints carry no parent");
    if (k.child_part) c.add(ViolationCode::FieldForbiddenForKind, path + ".child_part", "A/E joints carry no child");
    if (k.direction) c.add(ViolationCode::FieldForbiddenForKind, path + ".direction", "A/E joints carry no direction");
    if (k.pivot) c.add(ViolationCode::FieldForbiddenForKind, path + ".pivot", "A/E joints carry no pivot");
    if (k.range) c.add(ViolationCode::FieldForbiddenForKind, path + ".range", "A/E joints carry no range");
    return;
  }
  if (!k.parent_part || !k.child_part) {
    c.add(ViolationCode::MissingParentChild, path, "movable joints need both parent and child");
  } else if (*k.parent_part == *k.child_part) {
    c.add(ViolationCode::ParentEqualsChild, path, "parent and child must differ");
  }
  if (k.direction) {
    if (!finite(*k.direction)) {
      c.add(ViolationCode::NonFiniteValue, path + ".direction", "direction is not finite");
    } else if (std::abs(k.direction->norm() - 1.0) > kUnitTolerance) {
      c.add(ViolationCode::DirectionNotUnit, path + ".direction",
            fmt::format("direction norm {} is not 1", k.direction->norm()));
    }
  } else if (requires_direction(k.kind)) {
    c.add(ViolationCode::DirectionRequired, path + ".direction", "direction required for this kind");
  }
  if (k.kind == KinematicKind::B) {
    if (k.pivot) c.add(ViolationCode::PivotForbiddenForPrismatic, path + ".pivot", "prismatic joints have no pivot");
  } else if (requires_pivot(k.kind) && !k.pivot) {
    c.add(ViolationCode::PivotRequired, path + ".pivot", "pivot required for this kind");
  }
  if (k.pivot && !finite(*k.pivot)) {
    c.add(ViolationCode::NonFiniteValue, path + ".pivot", "pivot is not finite");
  }
  if (k.range) {
    if (!std::isfinite(k.range->lo) || !std::isfinite(k.range->hi)) {
      c.add(ViolationCode::NonFiniteValue, path + ".range", "range is not finite");
    } else if (k.range->lo > k.range->hi) {
      c.add(ViolationCode::RangeInverted, path + ".range", "range.lo exceeds range.hi");
    }
  }
}

}  // namespace

std::vector<Violation> validate_constraint(const KinematicConstraint& c, const std::string& path) {
  Collector col;
  check_constraint(c, path, col);
  return std::move(col.out);
}

std::vector<Violation> validate_asset(const ObjectAsset& asset, const ValidationOptions& options) {
  Collector c;
  const auto& s = asset.absolute_scale;
  const std::pair<double, const char*> dims[] = {
      {s.length_cm, "length_cm"}, {s.width_cm, "width_cm"}, {s.height_cm, "height_cm"}};
  for (const auto& [value, name] : dims) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      c.add(ViolationCode::NonPositiveScale, fmt::format("absolute_scale.{}", name), "scale must be positive");
    }
  }

  std::set<int> ids;
  for (std::size_t i = 0; i < asset.parts.size(); ++i) {
    if (!ids.insert(asset.parts[i].id).second) {
      c.add(ViolationCode::DuplicatePartId, fmt::format("parts[{}].id", i),
            fmt::format("part id {} used more than once", asset.parts[i].id));
    }
  }
  for (std::size_t i = 0; i < asset.parts.size(); ++i) {
    if (asset.parts[i].id != static_cast<int>(i) + 1) {
      c.add(ViolationCode::NonConsecutivePartIds, fmt::format("parts[{}].id", i),
            fmt::format("expected id {}, found {}", i + 1, asset.parts[i].id));
      break;
    }
  }
  for (std::size_t i = 0; i < asset.parts.size(); ++i) check_part(asset.parts[i], i, options, c);

  for (std::size_t i = 0; i < asset.constraints.size(); ++i) {
    const auto& k = asset.constraints[i];
    const std::string path = fmt::format("constraints[{}]", i);
    check_constraint(k, path, c);
    if (k.parent_part && !ids.count(*k.parent_part)) {
      c.add(ViolationCode::DanglingConstraintRef, path + ".parent_part",
            fmt::format("unknown part id {}", *k.parent_part));
    }
    if (k.child_part && !ids.count(*k.child_part)) {
      c.add(ViolationCode::DanglingConstraintRef, path + ".child_part",
            fmt::format("unknown part id {}", *k.child_part));
    }
  }
  return std::move(c.out);
}

std::string format_violations(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    out += fmt::format("{} at {}: {}\n", to_string(v.code), v.path, v.message);
  }
  return out;
}

}  // namespace physkit
