#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "physkit/asset.hpp"
#include "physkit/geometry.hpp"
#include "physkit/kmeans.hpp"

namespace physkit {

struct ContactRegion {
  PointCloud child_points;
  PointCloud parent_points;
  double tau = 0.0;

  std::vector<Vec3> all_points() const;
  Vec3 centroid() const;
};

/// Keeps child points within tau of the parent cloud and vice versa.
ContactRegion contact_region(const PointCloud& child, const PointCloud& parent, double tau);

struct FittedPlane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  double rms_residual = 0.0;
  Vec3 centroid = Vec3::Zero();
  /// First principal in-plane direction (largest variance), sign-canonical.
  Vec3 major_axis = Vec3::UnitX();
};

/// Total least squares via the covariance eigen decomposition.
FittedPlane fit_plane(std::span<const Vec3> points);

/// Flips `v` so its largest-magnitude component is positive.
Vec3 canonical_sign(const Vec3& v);

enum class CandidateSource { PlaneSampled, KMeansCenter, Manual };
std::string_view to_string(CandidateSource s);
std::optional<CandidateSource> parse_candidate_source(std::string_view text);

struct AxisCandidate {
  Vec3 direction = Vec3::UnitX();
  std::optional<Vec3> pivot;
  double score = 0.0;
  CandidateSource provenance = CandidateSource::PlaneSampled;
  // Score terms, kept for display.
  double alignment = 0.0;
  double edge_support = 0.0;
  double extent = 0.0;

  bool operator==(const AxisCandidate&) const = default;
};

struct ScoreWeights {
  double alignment = 0.5;
  double edge_support = 0.3;
  double extent = 0.2;
};

struct KinematicsConfig {
  double tau = 0.02;
  int m = 12;
  int k_max = 4;
  std::uint64_t seed = 0;
  std::size_t samples_per_part = 32768;
  ScoreWeights weights;
  double edge_radius = 0.05;
  int kmeans_restarts = 50;
  double silhouette_cutoff = 0.3;
  /// Pivots whose edge support is within this of the best compete on line fit.
  double pivot_support_slack = 0.05;
  MotionRange default_rotation_range{0.0, 1.5707963267948966};
};

std::vector<AxisCandidate> gen_axis_candidates(const FittedPlane& plane, const ContactRegion& region, int m,
                                               KinematicKind kind);

std::vector<Vec3> pivot_candidates(const ContactRegion& region, int k_max, const KinematicsConfig& config = {});
ClusterSelection pivot_clusters(const ContactRegion& region, int k_max, const KinematicsConfig& config);

/// Fills the score terms and sorts by score (desc), then direction and pivot
/// lexicographically; stable for exact duplicates.
std::vector<AxisCandidate> score_candidates(std::vector<AxisCandidate> cands, const ContactRegion& region,
                                            KinematicKind kind, const KinematicsConfig& config = {});

/// Fraction of points within `radius` of the line through `origin` along `d`.
double line_support(std::span<const Vec3> points, const Vec3& origin, const Vec3& d, double radius);
double mean_line_distance_sq(std::span<const Vec3> points, const Vec3& origin, const Vec3& d);

/// Prismatic range along d: how far the child can slide while its bounding box
/// stays inside the object's, capped at the child's own extent.
MotionRange prismatic_range(const ObjectAsset& asset, int child_id, const Vec3& direction);

struct EstimateDetail {
  ContactRegion region;
  FittedPlane plane;
  std::vector<AxisCandidate> candidates;  // scored, sorted
  ClusterSelection clusters;
  KinematicConstraint constraint;
};

EstimateDetail estimate_detailed(const ObjectAsset& asset, int child_id, int parent_id, KinematicKind kind,
                                 const KinematicsConfig& config = {});
KinematicConstraint estimate_constraint(const ObjectAsset& asset, int child_id, int parent_id, KinematicKind kind,
                                        const KinematicsConfig& config = {});

/// Turns a (human- or auto-) selected candidate into a constraint for the pair.
KinematicConstraint constraint_from_candidate(const ObjectAsset& asset, int child_id, int parent_id,
                                              KinematicKind kind, const AxisCandidate& candidate,
                                              const KinematicsConfig& config = {});

/// {"direction": [x,y,z], "pivot": [x,y,z] | null, "score", "provenance",
/// "alignment", "edge_support", "extent"}.
nlohmann::json candidate_to_json(const AxisCandidate& c);
/// Throws SchemaViolation. Missing score terms default to 0; provenance to "manual".
AxisCandidate candidate_from_json(const nlohmann::json& j);

}  // namespace physkit
