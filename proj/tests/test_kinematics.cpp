#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "physkit/error.hpp"
#include "physkit/fixtures.hpp"
#include "physkit/geometry.hpp"
#include "physkit/kinematics.hpp"
#include "physkit/kmeans.hpp"
#include "physkit/primitives.hpp"
#include "support.hpp"

using namespace physkit;
namespace prim = physkit::primitives;
using testsupport::Rng;

namespace {

ContactRegion region_from(std::vector<Vec3> pts) {
  ContactRegion r;
  r.child_points.points = std::move(pts);
  return r;
}

std::vector<Vec3> noisy_plane(Rng& rng, std::size_t n, double sigma) {
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), sigma * rng.normal());
  return pts;
}

std::vector<Vec3> blob(Rng& rng, const Vec3& c, std::size_t n, double sigma) {
  std::vector<Vec3> out(n);
  for (auto& p : out) p = c + sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
  return out;
}

}  // namespace

TEST(Contact, SharedFaceMembership) {
  const auto left = prim::box(Vec3(-1, -0.5, -0.5), Vec3(0, 0.5, 0.5));
  const auto right = prim::box(Vec3(0, -0.5, -0.5), Vec3(1, 0.5, 0.5));
  const PointCloud a = surface_sample(left, 10000, 1, 1);
  const PointCloud b = surface_sample(right, 10000, 2, 2);
  const ContactRegion r = contact_region(a, b, 0.02);
  ASSERT_FALSE(r.child_points.points.empty());
  ASSERT_FALSE(r.parent_points.points.empty());
  for (const auto& p : r.all_points()) EXPECT_LE(std::abs(p.x()), 0.02 + 1e-12);
  // Brute force membership oracle for the child side.
  std::size_t expect = 0;
  for (const auto& p : a.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b.points) best = std::min(best, (p - q).norm());
    expect += best <= 0.02;
  }
  EXPECT_EQ(r.child_points.points.size(), expect);
}

TEST(Contact, GapIsNoContact) {
  const PointCloud a = surface_sample(prim::box(Vec3(-1, 0, 0), Vec3(-0.5, 1, 1)), 2000, 1, 1);
  const PointCloud b = surface_sample(prim::box(Vec3(0.5, 0, 0), Vec3(1, 1, 1)), 2000, 2, 2);
  try {
    contact_region(a, b, 0.02);
    FAIL() << "expected NoContact";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoContact);
  }
}

TEST(Contact, InfiniteTauKeepsEverything) {
  const PointCloud a = surface_sample(prim::box(Vec3(-1, 0, 0), Vec3(-0.5, 1, 1)), 500, 1, 1);
  const PointCloud b = surface_sample(prim::box(Vec3(0.5, 0, 0), Vec3(1, 1, 1)), 700, 2, 2);
  const ContactRegion r = contact_region(a, b, std::numeric_limits<double>::infinity());
  EXPECT_EQ(r.child_points.points, a.points);
  EXPECT_EQ(r.parent_points.points, b.points);
}

TEST(PlaneFit, ExactPlane) {
  Rng rng(1);
  const auto pts = noisy_plane(rng, 500, 0.0);
  const FittedPlane p = fit_plane(pts);
  EXPECT_NEAR(std::abs(p.normal.z()), 1.0, 1e-12);
  EXPECT_NEAR(p.offset, 0.0, 1e-12);
  EXPECT_LT(p.rms_residual, 1e-9);
  EXPECT_LT(testsupport::line_angle_deg(p.normal, Vec3::UnitZ()) * M_PI / 180.0, 1e-6);
}

TEST(PlaneFit, TiltedExactPlane) {
  Rng rng(2);
  const Vec3 n = testsupport::random_unit(rng);
  const Vec3 u = n.unitOrthogonal();
  const Vec3 v = n.cross(u);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.push_back(0.3 * n + rng.uniform(-1, 1) * u + rng.uniform(-1, 1) * v);
  const FittedPlane p = fit_plane(pts);
  EXPECT_LT(testsupport::line_angle_deg(p.normal, n) * M_PI / 180.0, 1e-6);
  EXPECT_NEAR(std::abs(p.offset), 0.3, 1e-9);
}

TEST(PlaneFit, NoisyPercentile) {
  std::vector<double> angles;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    angles.push_back(testsupport::line_angle_deg(fit_plane(noisy_plane(rng, 500, 0.01)).normal, Vec3::UnitZ()));
  }
  std::sort(angles.begin(), angles.end());
  EXPECT_LT(angles[98], 2.0);
}

TEST(PlaneFit, CollinearIsDegenerate) {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2)};
  try {
    fit_plane(pts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateInput);
  }
}

TEST(AxisCandidates, TwoDirectionsAreOrthogonal) {
  FittedPlane plane;
  const auto c = gen_axis_candidates(plane, {}, 2, KinematicKind::C);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(testsupport::angle_deg(c[0].direction, c[1].direction), 90.0, 1e-9);
  for (const auto& a : c) EXPECT_NEAR(a.direction.dot(Vec3::UnitZ()), 0.0, 1e-12);
}

TEST(AxisCandidates, TwelveDirectionsOnFifteenDegreeGrid) {
  Rng rng(3);
  const auto pts = noisy_plane(rng, 200, 0.0);
  std::vector<Vec3> rotated;
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, testsupport::random_unit(rng)).toRotationMatrix();
  for (const auto& p : pts) rotated.push_back(rot * p);
  const auto c = gen_axis_candidates(fit_plane(rotated), {}, 12, KinematicKind::C);
  ASSERT_EQ(c.size(), 12u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double a = testsupport::line_angle_deg(c[i].direction, c[j].direction);
      EXPECT_NEAR(a / 15.0, std::round(a / 15.0), 1e-7) << a;
      EXPECT_GT(a, 1.0);
    }
  }
}

TEST(AxisCandidates, PrismaticAppendsNormalOnce) {
  FittedPlane plane;
  const auto c = gen_axis_candidates(plane, {}, 4, KinematicKind::B);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c.back().direction, Vec3(0, 0, 1));
  int normals = 0;
  for (const auto& a : c) normals += std::abs(a.direction.dot(Vec3::UnitZ())) > 1 - 1e-12;
  EXPECT_EQ(normals, 1);
}

TEST(Pivots, TwoPlantedBlobs) {
  Rng rng(5);
  auto pts = blob(rng, Vec3(-0.5, 0, 0), 400, 0.01);
  const auto right = blob(rng, Vec3(0.5, 0, 0), 400, 0.01);
  pts.insert(pts.end(), right.begin(), right.end());
  const auto centers = pivot_candidates(region_from(pts), 4);
  ASSERT_EQ(centers.size(), 2u);
  EXPECT_LT((centers[0] - Vec3(-0.5, 0, 0)).norm(), 0.05);
  EXPECT_LT((centers[1] - Vec3(0.5, 0, 0)).norm(), 0.05);
}

TEST(Pivots, SingleBlob) {
  Rng rng(6);
  const auto centers = pivot_candidates(region_from(blob(rng, Vec3::Zero(), 600, 0.01)), 4);
  ASSERT_EQ(centers.size(), 1u);
  EXPECT_LT(centers[0].norm(), 0.05);
}

TEST(Pivots, RepeatedPoint) {
  const Vec3 p(0.25, -0.5, 0.125);
  const auto centers = pivot_candidates(region_from(std::vector<Vec3>(50, p)), 4);
  ASSERT_EQ(centers.size(), 1u);
  EXPECT_EQ(centers[0], p);
}

TEST(KMeans, InertiaMatchesAssignment) {
  Rng rng(7);
  const auto pts = testsupport::random_cloud(rng, 300);
  const KMeansResult r = kmeans(pts, 3, 5, 1);
  double inertia = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    // Each label is the nearest center.
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : r.centers) best = std::min(best, (pts[i] - c).squaredNorm());
    EXPECT_NEAR((pts[i] - r.centers[r.labels[i]]).squaredNorm(), best, 1e-12);
    inertia += best;
  }
  EXPECT_NEAR(r.inertia, inertia, 1e-9);
}

TEST(KMeans, SilhouetteOfSeparatedClusters) {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(10, 0, 0), Vec3(10, 0, 1)};
  const std::vector<int> labels = {0, 0, 1, 1};
  // a = 1, b = mean distance to the other pair.
  const double b = (10.0 + std::sqrt(101.0)) / 2.0;
  EXPECT_NEAR(silhouette(pts, labels, 2), 1.0 - 1.0 / b, 1e-12);
}

TEST(Scoring, IdenticalCandidatesKeepOrder) {
  Rng rng(8);
  const auto region = region_from(noisy_plane(rng, 200, 0.0));
  std::vector<AxisCandidate> cands(5);
  for (std::size_t i = 0; i < cands.size(); ++i) cands[i].direction = Vec3(1, 0, 0);
  const auto sorted = score_candidates(cands, region, KinematicKind::B);
  ASSERT_EQ(sorted.size(), 5u);
  for (std::size_t i = 1; i < sorted.size(); ++i) EXPECT_EQ(sorted[i].score, sorted[0].score);
}

TEST(Scoring, ScoreIsWeightedSum) {
  const auto f = fixtures::hinged_box();
  const auto d = estimate_detailed(f.asset, 2, 1, KinematicKind::C);
  KinematicsConfig cfg;
  for (const auto& c : d.candidates) {
    EXPECT_NEAR(c.score,
                cfg.weights.alignment * c.alignment + cfg.weights.edge_support * c.edge_support +
                    cfg.weights.extent * c.extent,
                1e-12);
  }
  for (std::size_t i = 1; i < d.candidates.size(); ++i) EXPECT_GE(d.candidates[i - 1].score, d.candidates[i].score);
}

TEST(Scoring, HingedBoxSquareContactIsSymmetric) {
  // The lid covers the whole square top face, so x and y are equally good
  // hinge lines; only in-plane directions may win.
  const auto f = fixtures::hinged_box();
  const auto d = estimate_detailed(f.asset, 2, 1, KinematicKind::C);
  EXPECT_NEAR(testsupport::line_angle_deg(d.candidates.front().direction, Vec3::UnitZ()), 90.0, 1.0);
  const bool has_truth = std::any_of(d.candidates.begin(), d.candidates.end(), [](const AxisCandidate& c) {
    return testsupport::line_angle_deg(c.direction, Vec3::UnitY()) < 5.0;
  });
  EXPECT_TRUE(has_truth);
}

TEST(Scoring, DrawerFixtureTopDirection) {
  const auto f = fixtures::drawer();
  const auto d = estimate_detailed(f.asset, 2, 1, KinematicKind::B);
  EXPECT_LT(testsupport::line_angle_deg(d.candidates.front().direction, Vec3::UnitX()), 5.0);
}

TEST(Estimate, Laptop) {
  const auto f = fixtures::laptop();
  const auto c = estimate_constraint(f.asset, 2, 1, KinematicKind::C);
  EXPECT_FALSE(c.finalized);
  EXPECT_EQ(c.kind, KinematicKind::C);
  EXPECT_LT(testsupport::line_angle_deg(*c.direction, f.truth->direction), 5.0);
  EXPECT_LT(testsupport::point_line_distance(*c.pivot, *f.truth->pivot, f.truth->direction), 0.05);
  EXPECT_EQ(*c.range, KinematicsConfig{}.default_rotation_range);
}

TEST(Estimate, DrawerRange) {
  const auto f = fixtures::drawer();
  const auto c = estimate_constraint(f.asset, 2, 1, KinematicKind::B);
  EXPECT_LT(testsupport::line_angle_deg(*c.direction, Vec3::UnitX()), 5.0);
  EXPECT_FALSE(c.pivot.has_value());
  // The slide depth in normalized units: raw opening / half extent.
  const double s = -f.truth->range->lo;
  const double sign = c.direction->x() > 0 ? 1.0 : -1.0;
  EXPECT_NEAR(sign > 0 ? c.range->lo : -c.range->hi, -s, 0.1);
  EXPECT_NEAR(sign > 0 ? c.range->hi : -c.range->lo, 0.0, 0.1);
}

TEST(Estimate, BottleCap) {
  const auto f = fixtures::bottle_cap();
  const auto c = estimate_constraint(f.asset, 2, 1, KinematicKind::CB);
  EXPECT_LT(testsupport::line_angle_deg(*c.direction, Vec3::UnitZ()), 5.0);
  EXPECT_LT((*c.pivot - *f.truth->pivot).norm(), 0.05);
}

TEST(Estimate, ShowerHosePointPivot) {
  const auto f = fixtures::shower_hose();
  const auto c = estimate_constraint(f.asset, 2, 1, KinematicKind::D);
  EXPECT_FALSE(c.direction.has_value());
  EXPECT_LT((*c.pivot - *f.truth->pivot).norm(), 0.05);
}

TEST(Estimate, Deterministic) {
  const auto f = fixtures::door();
  KinematicsConfig cfg;
  cfg.seed = 42;
  const auto a = estimate_detailed(f.asset, 2, 1, KinematicKind::C, cfg);
  const auto b = estimate_detailed(f.asset, 2, 1, KinematicKind::C, cfg);
  EXPECT_EQ(a.candidates, b.candidates);
  EXPECT_EQ(a.constraint, b.constraint);
}

TEST(Estimate, RejectsNonMovableKinds) {
  const auto f = fixtures::laptop();
  for (auto k : {KinematicKind::A, KinematicKind::E}) {
    try {
      estimate_constraint(f.asset, 2, 1, k);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidArgument);
    }
  }
}

TEST(Candidates, JsonRoundTrip) {
  AxisCandidate c;
  c.direction = Vec3(0.6, 0.8, 0);
  c.pivot = Vec3(0.1, -0.2, 0.3);
  c.score = 0.75;
  c.provenance = CandidateSource::KMeansCenter;
  c.alignment = 0.8;
  c.edge_support = 0.5;
  c.extent = 0.25;
  EXPECT_EQ(candidate_from_json(candidate_to_json(c)), c);
  AxisCandidate bare;
  bare.direction = Vec3::UnitZ();
  bare.provenance = CandidateSource::Manual;
  EXPECT_EQ(candidate_from_json(nlohmann::json{{"direction", {0, 0, 1}}}), bare);
  try {
    candidate_from_json(nlohmann::json{{"direction", "up"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaViolation);
  }
}

TEST(PrismaticRange, SlidesStayInsideObject) {
  ObjectAsset a;
  a.parts.push_back(testsupport::simple_part(1, prim::box(Vec3(-1, -1, -1), Vec3(1, 1, -0.8))));
  a.parts.push_back(testsupport::simple_part(2, prim::box(Vec3(-0.5, -0.5, -0.8), Vec3(0.0, 0.5, -0.6))));
  const MotionRange r = prismatic_range(a, 2, Vec3::UnitX());
  // Child spans x in [-0.5, 0], object in [-1, 1], child extent 0.5.
  EXPECT_NEAR(r.lo, -0.5, 1e-12);
  EXPECT_NEAR(r.hi, 0.5, 1e-12);
}
