#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "physkit/asset.hpp"

namespace physkit {

struct KMeansResult {
  std::vector<Vec3> centers;
  std::vector<int> labels;
  double inertia = 0.0;  // sum of squared distances to assigned centers
};

/// Lloyd iterations from k-means++ seeds; the restart with lowest inertia wins
/// (first one on ties).
KMeansResult kmeans(std::span<const Vec3> points, int k, int restarts, std::uint64_t seed, int max_iter = 100);

/// Mean silhouette coefficient; singleton clusters contribute 0.
double silhouette(std::span<const Vec3> points, std::span<const int> labels, int k);

struct ClusterSelection {
  int k = 1;
  /// Lexicographically sorted; sizes[i] is the member count of centers[i].
  std::vector<Vec3> centers;
  std::vector<std::size_t> sizes;
  /// silhouettes[k - 2] for k = 2..k_max (only up to the distinct-point cap).
  std::vector<double> silhouettes;
};

struct ClusterOptions {
  int k_max = 4;
  int restarts = 50;
  double silhouette_cutoff = 0.3;
  std::size_t silhouette_sample = 1000;
  std::size_t kmeans_sample = 4000;
  std::uint64_t seed = 0;
};

ClusterSelection select_clusters(std::span<const Vec3> points, const ClusterOptions& options);

bool lex_less(const Vec3& a, const Vec3& b);

}  // namespace physkit
