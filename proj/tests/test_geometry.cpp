#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "physkit/error.hpp"
#include "physkit/fixtures.hpp"
#include "physkit/geometry.hpp"
#include "physkit/nearest.hpp"
#include "physkit/primitives.hpp"
#include "physkit/validate.hpp"
#include "support.hpp"

using namespace physkit;
namespace prim = physkit::primitives;
using testsupport::Rng;

namespace {

ObjectAsset one_part(TriangleMesh mesh) {
  ObjectAsset a;
  a.object_name = "thing";
  a.category = "thing";
  a.parts.push_back(testsupport::simple_part(1, std::move(mesh)));
  return a;
}

/// Flat w x h rectangle at height z split into `faces` triangles (faces even).
TriangleMesh strip(double w, double h, int faces, double z) {
  TriangleMesh m;
  const int cols = faces / 2;
  for (int i = 0; i <= cols; ++i) {
    const double x = -w / 2 + w * i / cols;
    m.vertices.emplace_back(x, -h / 2, z);
    m.vertices.emplace_back(x, h / 2, z);
  }
  for (int i = 0; i < cols; ++i) {
    const int a = 2 * i, b = 2 * i + 1, c = 2 * i + 2, d = 2 * i + 3;
    m.faces.push_back({a, c, d});
    m.faces.push_back({a, d, b});
  }
  return m;
}

/// Large panel (part 1) with a thin fragment (part 2) lying on its top face.
ObjectAsset panel_with_fragment(double area, int faces) {
  ObjectAsset a = one_part(prim::box(Vec3(-0.8, -0.8, -0.1), Vec3(0.8, 0.8, 0.0)));
  const double h = 0.2;
  a.parts.push_back(testsupport::simple_part(2, strip(area / h, h, faces, 0.0)));
  return a;
}

}  // namespace

TEST(Normalize, CubeToUnitCube) {
  const auto a = normalize_object(one_part(prim::box(Vec3(0, 0, 0), Vec3(2, 2, 2))));
  const Aabb b = a.bounds();
  EXPECT_NEAR((b.lo - Vec3(-1, -1, -1)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((b.hi - Vec3(1, 1, 1)).norm(), 0.0, 1e-12);
}

TEST(Normalize, PreservesRatios) {
  const auto a = normalize_object(one_part(prim::box(Vec3(0, 0, 0), Vec3(4, 2, 2))));
  const Vec3 half = a.bounds().size() / 2;
  EXPECT_NEAR(half.x(), 1.0, 1e-12);
  EXPECT_NEAR(half.y(), 0.5, 1e-12);
  EXPECT_NEAR(half.z(), 0.5, 1e-12);
}

TEST(Normalize, RandomMeshPostCondition) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    TriangleMesh m;
    const Vec3 scale(rng.uniform(0.1, 50), rng.uniform(0.1, 50), rng.uniform(0.1, 50));
    const Vec3 shift = testsupport::random_point(rng, -100, 100);
    for (int i = 0; i < 30; ++i) {
      m.vertices.push_back(testsupport::random_point(rng, -1, 1).cwiseProduct(scale) + shift);
    }
    for (int i = 0; i + 2 < 30; ++i) m.faces.push_back({i, i + 1, i + 2});
    const auto a = normalize_object(one_part(m));
    double max_abs = 0.0;
    int axis = 0;
    double widest = -1.0;
    const Aabb raw = m.bounds();
    for (int k = 0; k < 3; ++k) {
      if (raw.size()[k] > widest) {
        widest = raw.size()[k];
        axis = k;
      }
    }
    double min_axis = std::numeric_limits<double>::infinity();
    for (const auto& v : a.parts[0].mesh.vertices) {
      max_abs = std::max(max_abs, v.cwiseAbs().maxCoeff());
      min_axis = std::min(min_axis, v[axis]);
    }
    EXPECT_NEAR(max_abs, 1.0, 1e-9);
    EXPECT_NEAR(min_axis, -1.0, 1e-9);
  }
}

TEST(Normalize, CarriesPivotAndPrismaticRange) {
  ObjectAsset a = one_part(prim::box(Vec3(0, 0, 0), Vec3(4, 2, 2)));
  a.parts.push_back(testsupport::simple_part(2, prim::box(Vec3(4, 0, 0), Vec3(6, 2, 2))));
  KinematicConstraint c;
  c.kind = KinematicKind::B;
  c.parent_part = 1;
  c.child_part = 2;
  c.direction = Vec3::UnitX();
  c.range = MotionRange{-2.0, 0.0};
  a.constraints.push_back(c);
  const auto n = normalize_object(a);
  // half extent is 3, so the slide of 2 raw units becomes 2/3.
  EXPECT_NEAR(n.constraints[0].range->lo, -2.0 / 3.0, 1e-12);
  EXPECT_EQ(*n.constraints[0].direction, Vec3::UnitX());
}

TEST(Merge, RuleTruthTable) {
  // Literal decision table: (area <= 0.2, area <= 0.06, faces <= 100) -> merge.
  struct Row {
    bool le_hard, le_soft, faces_le, merge;
  };
  const Row table[] = {
      {false, false, false, false}, {false, false, true, false}, {false, true, false, false},
      {false, true, true, true},    {true, false, false, true},  {true, false, true, true},
      {true, true, false, true},    {true, true, true, true},
  };
  for (const Row& r : table) {
    EXPECT_EQ(merge_rule(r.le_hard, r.le_soft, r.faces_le), r.merge) << r.le_hard << r.le_soft << r.faces_le;
  }
}

TEST(Merge, GeometricCasesAtBoundaries) {
  struct Case {
    double area;
    int faces;
    bool absorbed;
  };
  const Case cases[] = {
      {0.05, 60, true},  {0.05, 150, true}, {0.06, 100, true}, {0.1, 60, true},
      {0.2, 150, true},  {0.25, 60, false}, {0.25, 150, false}, {0.3, 100, false},
  };
  for (const Case& c : cases) {
    const ObjectAsset a = panel_with_fragment(c.area, c.faces);
    ASSERT_NEAR(a.parts[1].mesh.area(), c.area, 1e-12);
    EXPECT_EQ(is_tiny(a.parts[1].mesh, MergePolicy{}), c.absorbed) << c.area << " " << c.faces;
    const MergeResult r = merge_tiny_parts(a);
    EXPECT_EQ(r.asset.parts.size(), c.absorbed ? 1u : 2u) << c.area << " " << c.faces;
    if (c.absorbed) {
      ASSERT_EQ(r.absorbed.size(), 1u);
      EXPECT_EQ(r.absorbed[0], std::make_pair(2, 1));
      EXPECT_EQ(r.id_map.at(2), 1);
    }
  }
}

TEST(Merge, IsolatedTinyPartKept) {
  ObjectAsset a = one_part(prim::box(Vec3(-0.8, -0.8, -0.1), Vec3(0.8, 0.8, 0.0)));
  a.parts.push_back(testsupport::simple_part(2, strip(0.25, 0.2, 60, 0.5)));
  const MergeResult r = merge_tiny_parts(a);
  EXPECT_EQ(r.asset.parts.size(), 2u);
  EXPECT_EQ(r.isolated, std::vector<int>{2});
}

TEST(Merge, RenumbersAndRemapsConstraints) {
  const auto f = fixtures::cabinet_drawer();
  const MergeResult r = merge_tiny_parts(f.asset);
  EXPECT_TRUE(validate_asset(r.asset).empty()) << format_violations(validate_asset(r.asset));
  for (std::size_t i = 0; i < r.asset.parts.size(); ++i) EXPECT_EQ(r.asset.parts[i].id, static_cast<int>(i) + 1);
  for (const auto& c : r.asset.constraints) {
    if (!c.child_part) continue;
    EXPECT_NE(c.child_part, c.parent_part);
  }
}

TEST(Sampling, UnitSquareBinomial) {
  const TriangleMesh sq = prim::quad(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0));
  ASSERT_EQ(sq.faces.size(), 2u);
  const std::size_t n = 10000;
  const SurfaceSamples s = sample_surface(sq, n, 5);
  std::size_t first = 0;
  for (auto f : s.faces) first += f == 0;
  const double sigma = std::sqrt(n * 0.25);
  EXPECT_LE(std::abs(static_cast<double>(first) - n / 2.0), 3 * sigma);
  EXPECT_LE(std::abs(static_cast<double>(n - first) - n / 2.0), 3 * sigma);
}

TEST(Sampling, PointOnTriangle) {
  TriangleMesh tri;
  tri.vertices = {Vec3(0.1, 0.2, 0.3), Vec3(1.5, -0.2, 0.7), Vec3(-0.4, 0.9, 1.1)};
  tri.faces = {{0, 1, 2}};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Vec3 p = surface_sample(tri, 1, seed).points.at(0);
    // Barycentric coordinates by solving the 3x2 least squares system.
    Eigen::Matrix<double, 3, 2> m;
    m.col(0) = tri.vertices[1] - tri.vertices[0];
    m.col(1) = tri.vertices[2] - tri.vertices[0];
    const Eigen::Vector2d uv = m.colPivHouseholderQr().solve(p - tri.vertices[0]);
    EXPECT_GE(uv[0], -1e-12);
    EXPECT_GE(uv[1], -1e-12);
    EXPECT_LE(uv[0] + uv[1], 1 + 1e-12);
    EXPECT_NEAR((m * uv + tri.vertices[0] - p).norm(), 0.0, 1e-12);
  }
}

TEST(Sampling, Deterministic) {
  const auto m = prim::uv_sphere(Vec3::Zero(), 1.0);
  EXPECT_EQ(surface_sample(m, 500, 9).points, surface_sample(m, 500, 9).points);
  EXPECT_NE(surface_sample(m, 500, 9).points, surface_sample(m, 500, 10).points);
}

TEST(Sampling, ObjectSamplesCarryPartIds) {
  const auto a = fixtures::laptop().asset;
  const ObjectSamples s = sample_object(a, 2000, 1);
  ASSERT_EQ(s.points.size(), 2000u);
  ASSERT_EQ(s.part_ids.size(), 2000u);
  std::size_t base = 0;
  for (int id : s.part_ids) base += id == 1;
  // Base area share, computed directly from the meshes.
  const double share = a.parts[0].mesh.area() / (a.parts[0].mesh.area() + a.parts[1].mesh.area());
  EXPECT_NEAR(static_cast<double>(base) / 2000.0, share, 4 * std::sqrt(share * (1 - share) / 2000));
}

TEST(Nearest, SelfIsZero) {
  Rng rng(1);
  const auto c = testsupport::random_cloud(rng, 300);
  for (double d : nearest_distances(c, c)) EXPECT_EQ(d, 0.0);
}

TEST(Nearest, HandComputed) {
  const std::vector<Vec3> q = {Vec3(0, 0, 0)};
  const std::vector<Vec3> t = {Vec3(1, 0, 0), Vec3(0, 2, 0)};
  const auto d = nearest_distances(q, t);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], 1.0);
}

TEST(Nearest, MatchesBruteForce2000) {
  Rng rng(2);
  const auto q = testsupport::random_cloud(rng, 2000);
  const auto t = testsupport::random_cloud(rng, 2000, -0.7, 1.3);
  const auto got = nearest_distances(q, t);
  for (std::size_t i = 0; i < q.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : t) best = std::min(best, (q[i] - p).norm());
    ASSERT_NEAR(got[i], best, 1e-12) << i;
  }
}

TEST(Nearest, ClusteredAndDegenerateClouds) {
  Rng rng(4);
  std::vector<Vec3> t(500, Vec3(0.3, 0.3, 0.3));
  for (int i = 0; i < 20; ++i) t.push_back(testsupport::random_point(rng, 5, 6));
  const auto q = testsupport::random_cloud(rng, 200, -2, 7);
  const auto got = nearest_distances(q, t);
  const auto ref = nearest_distances_brute(q, t);
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_EQ(got[i], ref[i]);
}

TEST(Nearest, WithinRadius) {
  Rng rng(6);
  const auto pts = testsupport::random_cloud(rng, 1000);
  GridIndex index(pts);
  const Vec3 q(0.1, -0.2, 0.3);
  auto got = index.within(q, 0.25);
  std::sort(got.begin(), got.end());
  std::vector<std::size_t> expect;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if ((pts[i] - q).norm() <= 0.25) expect.push_back(i);
  }
  EXPECT_EQ(got, expect);
}
