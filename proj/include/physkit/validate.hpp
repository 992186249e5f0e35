#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "physkit/asset.hpp"

namespace physkit {

enum class ViolationCode {
  DuplicatePartId,
  NonConsecutivePartIds,
  EmptyMesh,
  InvalidFaceIndex,
  DegenerateFace,
  CoordinateOutOfRange,
  NonFiniteCoordinate,
  NonPositiveScale,
  AffordanceOutOfRange,
  NegativeDensity,
  PoissonOutOfRange,
  NegativeYoungsModulus,
  DanglingConstraintRef,
  FieldForbiddenForKind,
  MissingParentChild,
  ParentEqualsChild,
  DirectionRequired,
  DirectionNotUnit,
  PivotRequired,
  PivotForbiddenForPrismatic,
  RangeInverted,
  NonFiniteValue,
  EmptyDescription,
};

std::string_view to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  std::string path;  // e.g. "parts[2].affordance_rank"
  std::string message;
};

struct ValidationOptions {
  /// Enforce |coord| <= 1 (assets straight from a raw mesh source skip this).
  bool require_normalized = true;
  /// Approved assets must carry all four descriptions.
  bool require_descriptions = false;
};

/// Total: never throws, reports every violation in a fixed traversal order.
std::vector<Violation> validate_asset(const ObjectAsset& asset, const ValidationOptions& options = {});

/// Checks only the kind/field-presence rules of one constraint.
std::vector<Violation> validate_constraint(const KinematicConstraint& c, const std::string& path = "constraint");

std::string format_violations(const std::vector<Violation>& violations);

}  // namespace physkit
