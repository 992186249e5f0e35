#pragma once

// Shared helpers for the unit and acceptance tests: scratch directories,
// angle helpers and small random generators for property tests.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "physkit/asset.hpp"
#include "physkit/primitives.hpp"
#include "physkit/rng.hpp"

namespace testsupport {

using physkit::Rng;
using physkit::Vec3;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("physkit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline double angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

/// Angle between two lines (direction sign ignored).
inline double line_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

inline double point_line_distance(const Vec3& p, const Vec3& origin, const Vec3& dir) {
  const Vec3 d = dir.normalized();
  const Vec3 r = p - origin;
  return (r - r.dot(d) * d).norm();
}

inline Vec3 random_point(Rng& rng, double lo, double hi) {
  return Vec3(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi));
}

inline std::vector<Vec3> random_cloud(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<Vec3> out(n);
  for (auto& p : out) p = random_point(rng, lo, hi);
  return out;
}

inline Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-9) v = Vec3(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

inline physkit::Part simple_part(int id, physkit::TriangleMesh mesh, double density = 1.0) {
  physkit::Part p;
  p.id = id;
  p.name = "part" + std::to_string(id);
  p.mesh = std::move(mesh);
  p.material = physkit::MaterialSpec{"Wood", 11.0, 0.35, density};
  p.affordance_rank = 1 + (id - 1) % 10;
  p.descriptions = {"basic " + p.name, "functional " + p.name, "kinematic " + p.name, "grasped " + p.name};
  return p;
}

/// Random valid normalized asset: 1..4 axis-aligned boxes inside [-1, 1]^3,
/// optional joints between part 1 and the others.
inline physkit::ObjectAsset random_asset(Rng& rng) {
  using namespace physkit;
  ObjectAsset a;
  a.object_name = "obj" + std::to_string(rng.index(1000));
  a.category = "cat" + std::to_string(rng.index(10));
  a.absolute_scale = {rng.uniform(1, 200), rng.uniform(1, 200), rng.uniform(1, 200)};
  a.provenance = "random";
  const int n = 1 + static_cast<int>(rng.index(4));
  for (int id = 1; id <= n; ++id) {
    Vec3 lo = random_point(rng, -0.9, 0.3);
    Vec3 hi = lo + random_point(rng, 0.05, 0.6);
    Part p = simple_part(id, primitives::box(lo, hi), rng.uniform(0.1, 9.0));
    p.material.youngs_modulus = rng.uniform(0.01, 300);
    p.material.poisson_ratio = rng.uniform(0.0, 0.49);
    p.affordance_rank = 1 + static_cast<int>(rng.index(10));
    a.parts.push_back(std::move(p));
  }
  for (int id = 2; id <= n; ++id) {
    KinematicConstraint c;
    const std::array<KinematicKind, 5> kinds = {KinematicKind::A, KinematicKind::B, KinematicKind::C,
                                                KinematicKind::D, KinematicKind::CB};
    c.kind = kinds[rng.index(kinds.size())];
    c.finalized = true;
    if (has_parent_child(c.kind)) {
      c.parent_part = 1;
      c.child_part = id;
    }
    if (requires_direction(c.kind)) c.direction = random_unit(rng);
    if (requires_pivot(c.kind)) c.pivot = random_point(rng, -1, 1);
    if (has_parent_child(c.kind)) {
      const double lo = rng.uniform(-1, 0);
      c.range = MotionRange{lo, lo + rng.uniform(0, 2)};
    }
    a.constraints.push_back(c);
  }
  return a;
}

}  // namespace testsupport
