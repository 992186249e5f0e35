#include "physkit/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "physkit/error.hpp"
#include "physkit/nearest.hpp"
#include "physkit/rng.hpp"

namespace physkit {

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

namespace {

// Seeded partial Fisher-Yates; a plain stride aliases with interleaved inputs.
std::vector<Vec3> random_subset(std::span<const Vec3> points, std::size_t cap, std::uint64_t seed) {
  if (points.size() <= cap) return {points.begin(), points.end()};
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<Vec3> out;
  out.reserve(cap);
  for (std::size_t i : idx) out.push_back(points[i]);
  return out;
}

std::size_t count_distinct(std::span<const Vec3> points, std::size_t stop_at) {
  std::vector<Vec3> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), lex_less);
  std::size_t distinct = sorted.empty() ? 0 : 1;
  for (std::size_t i = 1; i < sorted.size() && distinct < stop_at; ++i) {
    if (sorted[i] != sorted[i - 1]) ++distinct;
  }
  return distinct;
}

int nearest_center(const Vec3& p, const std::vector<Vec3>& centers, double* dist_sq = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = squared_distance(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist_sq) *dist_sq = best_d;
  return best;
}

KMeansResult lloyd_once(std::span<const Vec3> points, int k, Rng& rng, int max_iter) {
  const std::size_t n = points.size();
  std::vector<Vec3> centers;
  centers.push_back(points[rng.index(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double run = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        run += d2[i];
        if (run > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
  }

  KMeansResult r;
  r.labels.assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int label = nearest_center(points[i], centers);
      if (label != r.labels[i]) {
        r.labels[i] = label;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Vec3> sums(k, Vec3::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[r.labels[i]] += points[i];
      ++counts[r.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
    }
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) r.inertia += squared_distance(points[i], centers[r.labels[i]]);
  r.centers = std::move(centers);
  return r;
}

}  // namespace

KMeansResult kmeans(std::span<const Vec3> points, int k, int restarts, std::uint64_t seed, int max_iter) {
  if (points.empty()) throw Error(Errc::EmptyGeometry, "k-means on an empty point set");
  if (k < 1) throw Error(Errc::InvalidArgument, "k-means needs k >= 1");
  Rng rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    KMeansResult candidate = lloyd_once(points, k, rng, max_iter);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

double silhouette(std::span<const Vec3> points, std::span<const int> labels, int k) {
  const std::size_t n = points.size();
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[l];
  double total = 0.0;
  std::vector<double> sum_to(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to[labels[j]] += std::sqrt(squared_distance(points[i], points[j]));
    }
    const int own = labels[i];
    if (counts[own] <= 1) continue;
    const double a = sum_to[own] / static_cast<double>(counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || counts[c] == 0) continue;
      b = std::min(b, sum_to[c] / static_cast<double>(counts[c]));
    }
    if (!std::isfinite(b)) continue;
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

ClusterSelection select_clusters(std::span<const Vec3> points, const ClusterOptions& options) {
  if (points.empty()) throw Error(Errc::EmptyGeometry, "cannot cluster an empty region");
  if (options.k_max < 1) throw Error(Errc::InvalidArgument, "k_max must be >= 1");
  const std::vector<Vec3> data = random_subset(points, options.kmeans_sample, derive_seed(options.seed, 0x5a));
  const int k_cap = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(options.k_max), count_distinct(data, options.k_max)));

  std::vector<KMeansResult> runs;
  runs.push_back(kmeans(data, 1, 1, derive_seed(options.seed, 1)));
  ClusterSelection sel;
  const std::vector<Vec3> sil_points = random_subset(data, options.silhouette_sample, derive_seed(options.seed, 0x5b));
  int best_k = 1;
  double best_s = -std::numeric_limits<double>::infinity();
  for (int k = 2; k <= k_cap; ++k) {
    runs.push_back(kmeans(data, k, options.restarts, derive_seed(options.seed, static_cast<std::uint64_t>(k))));
    std::vector<int> sil_labels;
    sil_labels.reserve(sil_points.size());
    for (const auto& p : sil_points) sil_labels.push_back(nearest_center(p, runs.back().centers));
    const double s = silhouette(sil_points, sil_labels, k);
    sel.silhouettes.push_back(s);
    if (s > best_s) {
      best_s = s;
      best_k = k;
    }
  }
  if (best_s < options.silhouette_cutoff) best_k = 1;
  sel.k = best_k;

  const KMeansResult& chosen = runs[best_k - 1];
  std::vector<std::size_t> order(chosen.centers.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return lex_less(chosen.centers[a], chosen.centers[b]); });
  std::vector<std::size_t> counts(chosen.centers.size(), 0);
  for (int l : chosen.labels) ++counts[l];
  for (std::size_t i : order) {
    sel.centers.push_back(chosen.centers[i]);
    sel.sizes.push_back(counts[i]);
  }
  return sel;
}

}  // namespace physkit
