#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "physkit/asset.hpp"

namespace physkit {

struct PointCloud {
  std::vector<Vec3> points;
  int source_part = 0;
};

/// Maps raw coordinates into [-1, 1]^3: p' = (p - center) / half_extent.
struct NormalizeTransform {
  Vec3 center = Vec3::Zero();
  double half_extent = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - center) / half_extent; }
};

NormalizeTransform normalization_transform(const ObjectAsset& asset);
/// Applies `t` to every vertex, constraint pivot and prismatic range.
ObjectAsset apply_normalization(ObjectAsset asset, const NormalizeTransform& t);
/// Centers the union bounding box at the origin with max half-extent 1.
ObjectAsset normalize_object(const ObjectAsset& asset);

struct MergePolicy {
  double area_threshold_hard = 0.2;
  int face_threshold = 100;
  double area_threshold_soft = 0.06;
};

/// Decision table: merge when area <= hard, or when area <= soft and faces <= face threshold.
constexpr bool merge_rule(bool area_le_hard, bool area_le_soft, bool faces_le_threshold) {
  return area_le_hard || (area_le_soft && faces_le_threshold);
}
bool is_tiny(const TriangleMesh& mesh, const MergePolicy& policy);

struct MergeResult {
  ObjectAsset asset;
  /// (tiny part id, absorber id), both in the input numbering, in merge order.
  std::vector<std::pair<int, int>> absorbed;
  /// Tiny parts with no adjacent part, input numbering.
  std::vector<int> isolated;
  /// Input part id -> output part id (absorbed parts map to their absorber).
  std::map<int, int> id_map;
};

inline constexpr std::size_t kAdjacencySamples = 1024;
inline constexpr double kAdjacencyDistance = 0.01;

MergeResult merge_tiny_parts(const ObjectAsset& asset, const MergePolicy& policy = {},
                             std::uint64_t seed = 0);

/// Area-weighted uniform samples; also reports the source face of every point.
struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<std::size_t> faces;
};
SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);
PointCloud surface_sample(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, int source_part = 0);

/// Samples the whole object at once (area weighted across parts).
struct ObjectSamples {
  std::vector<Vec3> points;
  std::vector<int> part_ids;
};
ObjectSamples sample_object(const ObjectAsset& asset, std::size_t n, std::uint64_t seed);

/// Point cloud of one part with the seed stream derived from the part id.
PointCloud sample_part(const ObjectAsset& asset, int part_id, std::size_t n, std::uint64_t seed);

}  // namespace physkit
