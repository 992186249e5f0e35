#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "physkit/asset.hpp"

namespace physkit {

/// Uniform-grid nearest-neighbor index. Queries are exact: the result equals
/// brute force bit-for-bit because both evaluate the same squared-distance
/// expression and the search only stops once no unvisited cell can be closer.
class GridIndex {
 public:
  explicit GridIndex(std::span<const Vec3> points, double min_cell = 0.02);

  /// Squared distance to the nearest indexed point and its index.
  std::pair<double, std::size_t> nearest_sq(const Vec3& q) const;
  double nearest(const Vec3& q) const;
  /// Like nearest_sq, but only looks within sqrt(max_sq) of q; returns
  /// (inf, 0) when nothing is that close.
  std::pair<double, std::size_t> nearest_sq_bounded(const Vec3& q, double max_sq) const;

  /// Indices of points within `radius` of `q` (inclusive).
  std::vector<std::size_t> within(const Vec3& q, double radius) const;

  double cell_size() const { return cell_; }
  std::size_t size() const { return points_.size(); }

 private:
  std::size_t cell_id(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims_[1] + static_cast<std::size_t>(y)) * dims_[0] +
           static_cast<std::size_t>(x);
  }
  std::array<int, 3> cell_of(const Vec3& p) const;

  std::vector<Vec3> points_;
  Vec3 origin_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
};

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// result[i] = min_j |query[i] - target[j]|, via GridIndex.
std::vector<double> nearest_distances(std::span<const Vec3> query, std::span<const Vec3> target);
/// O(n*m) reference used by tests and as an oracle.
std::vector<double> nearest_distances_brute(std::span<const Vec3> query, std::span<const Vec3> target);

}  // namespace physkit
