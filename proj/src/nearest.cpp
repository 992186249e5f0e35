#include "physkit/nearest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "physkit/error.hpp"

namespace physkit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

GridIndex::GridIndex(std::span<const Vec3> points, double min_cell) : points_(points.begin(), points.end()) {
  if (points_.empty()) throw Error(Errc::EmptyGeometry, "nearest-neighbor index over an empty cloud");
  Aabb box;
  for (const auto& p : points_) box.extend(p);
  origin_ = box.lo;
  const Vec3 extent = box.size();
  const double n = static_cast<double>(points_.size());
  // Expected nearest-neighbor spacing, treating degenerate axes as one cell thick.
  const double volume = std::max(extent.x(), min_cell) * std::max(extent.y(), min_cell) *
                        std::max(extent.z(), min_cell);
  cell_ = std::max(min_cell, std::cbrt(volume / n));
  const double max_cells = std::max(64.0, 4.0 * n);
  for (;;) {
    for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(std::floor(extent[a] / cell_)) + 1;
    if (static_cast<double>(dims_[0]) * dims_[1] * dims_[2] <= max_cells) break;
    cell_ *= 1.25;
  }

  const std::size_t ncells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  std::vector<std::size_t> cell_of_point(points_.size());
  std::vector<std::size_t> counts(ncells + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    auto c = cell_of(points_[i]);
    cell_of_point[i] = cell_id(c[0], c[1], c[2]);
    ++counts[cell_of_point[i] + 1];
  }
  for (std::size_t c = 1; c <= ncells; ++c) counts[c] += counts[c - 1];
  cell_start_ = counts;
  order_.resize(points_.size());
  std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) order_[cursor[cell_of_point[i]]++] = i;
}

std::array<int, 3> GridIndex::cell_of(const Vec3& p) const {
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - origin_[a]) / cell_);
    c[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(dims_[a] - 1)));
  }
  return c;
}

std::pair<double, std::size_t> GridIndex::nearest_sq(const Vec3& q) const {
  const auto c = cell_of(q);
  double best = kInf;
  std::size_t best_index = 0;
  auto scan_cell = [&](int x, int y, int z) {
    const std::size_t id = cell_id(x, y, z);
    for (std::size_t k = cell_start_[id]; k < cell_start_[id + 1]; ++k) {
      const std::size_t i = order_[k];
      const double d = squared_distance(q, points_[i]);
      if (d < best || (d == best && i < best_index)) {
        best = d;
        best_index = i;
      }
    }
  };
  const int max_r = std::max({dims_[0], dims_[1], dims_[2]});
  for (int r = 0; r <= max_r; ++r) {
    const int x0 = c[0] - r, x1 = c[0] + r, y0 = c[1] - r, y1 = c[1] + r, z0 = c[2] - r, z1 = c[2] + r;
    for (int z = std::max(z0, 0); z <= std::min(z1, dims_[2] - 1); ++z) {
      const bool z_face = (z == z0 || z == z1);
      for (int y = std::max(y0, 0); y <= std::min(y1, dims_[1] - 1); ++y) {
        const bool y_face = (y == y0 || y == y1);
        if (z_face || y_face) {
          for (int x = std::max(x0, 0); x <= std::min(x1, dims_[0] - 1); ++x) scan_cell(x, y, z);
        } else {
          if (x0 >= 0) scan_cell(x0, y, z);
          if (x1 <= dims_[0] - 1 && x1 != x0) scan_cell(x1, y, z);
        }
      }
    }
    // Distance from q to the region outside the visited cube of cells.
    double bound = kInf;
    bool covers_all = true;
    for (int a = 0; a < 3; ++a) {
      if (c[a] - r > 0) {
        bound = std::min(bound, q[a] - (origin_[a] + (c[a] - r) * cell_));
        covers_all = false;
      }
      if (c[a] + r + 1 < dims_[a]) {
        bound = std::min(bound, origin_[a] + (c[a] + r + 1) * cell_ - q[a]);
        covers_all = false;
      }
    }
    if (covers_all) break;
    if (best < kInf) {
      const double safe = bound - 1e-9 * cell_;
      if (safe > 0.0 && best <= safe * safe) break;
    }
  }
  return {best, best_index};
}

double GridIndex::nearest(const Vec3& q) const { return std::sqrt(nearest_sq(q).first); }

std::pair<double, std::size_t> GridIndex::nearest_sq_bounded(const Vec3& q, double max_sq) const {
  double best = kInf;
  std::size_t best_index = 0;
  if (!(max_sq >= 0.0)) return {best, best_index};
  const double radius = std::sqrt(max_sq);
  const auto lo = cell_of(q - Vec3::Constant(radius));
  const auto hi = cell_of(q + Vec3::Constant(radius));
  for (int z = lo[2]; z <= hi[2]; ++z) {
    for (int y = lo[1]; y <= hi[1]; ++y) {
      for (int x = lo[0]; x <= hi[0]; ++x) {
        const std::size_t id = cell_id(x, y, z);
        for (std::size_t k = cell_start_[id]; k < cell_start_[id + 1]; ++k) {
          const std::size_t i = order_[k];
          const double d = squared_distance(q, points_[i]);
          if (d <= max_sq && (d < best || (d == best && i < best_index))) {
            best = d;
            best_index = i;
          }
        }
      }
    }
  }
  return {best, best_index};
}

std::vector<std::size_t> GridIndex::within(const Vec3& q, double radius) const {
  std::vector<std::size_t> out;
  const auto lo = cell_of(q - Vec3::Constant(radius));
  const auto hi = cell_of(q + Vec3::Constant(radius));
  const double r2 = radius * radius;
  for (int z = lo[2]; z <= hi[2]; ++z) {
    for (int y = lo[1]; y <= hi[1]; ++y) {
      for (int x = lo[0]; x <= hi[0]; ++x) {
        const std::size_t id = cell_id(x, y, z);
        for (std::size_t k = cell_start_[id]; k < cell_start_[id + 1]; ++k) {
          if (squared_distance(q, points_[order_[k]]) <= r2) out.push_back(order_[k]);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> nearest_distances(std::span<const Vec3> query, std::span<const Vec3> target) {
  if (query.empty() || target.empty()) throw Error(Errc::EmptyGeometry, "nearest_distances needs non-empty clouds");
  GridIndex index(target);
  std::vector<double> out(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) out[i] = std::sqrt(index.nearest_sq(query[i]).first);
  return out;
}

std::vector<double> nearest_distances_brute(std::span<const Vec3> query, std::span<const Vec3> target) {
  std::vector<double> out(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    double best = kInf;
    for (const auto& t : target) best = std::min(best, squared_distance(query[i], t));
    out[i] = std::sqrt(best);
  }
  return out;
}

}  // namespace physkit
