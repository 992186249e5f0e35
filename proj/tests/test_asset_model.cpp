#include <gtest/gtest.h>

#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/fixtures.hpp"
#include "physkit/validate.hpp"
#include "support.hpp"

using namespace physkit;
using testsupport::TempDir;

namespace {

bool has_code(const std::vector<Violation>& vs, ViolationCode code) {
  return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.code == code; });
}

}  // namespace

TEST(AssetIo, HingedBoxReloadsFieldForField) {
  const auto f = fixtures::hinged_box();
  TempDir dir("hinge");
  save_asset(f.asset, dir.path());
  const ObjectAsset back = load_asset(dir.path());
  ASSERT_EQ(back.parts.size(), 2u);
  ASSERT_EQ(back.constraints.size(), 1u);
  EXPECT_EQ(back.constraints[0].kind, KinematicKind::C);
  EXPECT_EQ(back.object_name, f.asset.object_name);
  EXPECT_EQ(back.absolute_scale, f.asset.absolute_scale);
  for (std::size_t i = 0; i < back.parts.size(); ++i) {
    EXPECT_EQ(back.parts[i].material, f.asset.parts[i].material);
    EXPECT_EQ(back.parts[i].descriptions, f.asset.parts[i].descriptions);
    EXPECT_EQ(back.parts[i].mesh, f.asset.parts[i].mesh);
  }
  EXPECT_EQ(back, f.asset);
}

TEST(AssetIo, MissingAssetJson) {
  TempDir dir("empty");
  try {
    load_asset(dir.path());
    FAIL() << "expected MissingFile";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingFile);
  }
}

TEST(AssetIo, DanglingConstraintIsSchemaViolation) {
  testsupport::Rng rng(3);
  ObjectAsset a;
  while (a.parts.size() != 3) a = testsupport::random_asset(rng);
  TempDir dir("dangling");
  save_asset(a, dir.path());
  json doc = json::parse(read_text_file(dir / "asset.json"));
  doc["constraints"] = json::array({json{{"kind", "B"},
                                         {"parent_part", 1},
                                         {"child_part", 99},
                                         {"direction", {1, 0, 0}},
                                         {"pivot", nullptr},
                                         {"range", {0, 1}},
                                         {"finalized", true}}});
  write_text_file(dir / "asset.json", doc.dump(2));
  try {
    load_asset(dir.path());
    FAIL() << "expected SchemaViolation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaViolation);
  }
}

TEST(AssetIo, SaveRefusesInvalidAsset) {
  auto a = fixtures::hinged_box().asset;
  a.parts[0].affordance_rank = 0;
  TempDir dir("invalid");
  try {
    save_asset(a, dir.path());
    FAIL() << "expected ValidationError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ValidationError);
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "asset.json"));
}

TEST(AssetIo, RandomAssetsRoundTrip) {
  testsupport::Rng rng(20);
  TempDir dir("rt");
  for (int trial = 0; trial < 100; ++trial) {
    const ObjectAsset a = testsupport::random_asset(rng);
    ASSERT_TRUE(validate_asset(a).empty()) << format_violations(validate_asset(a));
    const auto sub = dir / std::to_string(trial);
    save_asset(a, sub);
    EXPECT_EQ(load_asset(sub), a) << "trial " << trial;
  }
}

TEST(AssetIo, JsonIsCanonical) {
  const auto a = fixtures::laptop().asset;
  const std::string once = canonical_dump(asset_to_json(a));
  const std::string twice = canonical_dump(asset_to_json(asset_from_json(json::parse(once))));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(once.back(), '\n');
}

TEST(AssetIo, ObjParsesNegativeIndicesAndRejectsGarbage) {
  const TriangleMesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
  try {
    parse_obj("v 0 0 zero\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MeshParseError);
  }
}

TEST(AssetIo, DegenerateFacesDropped) {
  TriangleMesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 2 4\n");
  EXPECT_EQ(drop_degenerate_faces(m), 1u);
  EXPECT_EQ(m.faces.size(), 1u);
}

TEST(Validate, FixturesAreValid) {
  for (const auto& name : fixtures::fixture_names()) {
    const auto vs = validate_asset(fixtures::by_name(name).asset);
    EXPECT_TRUE(vs.empty()) << name << ": " << format_violations(vs);
  }
}

TEST(Validate, AffordanceZero) {
  auto a = fixtures::hinged_box().asset;
  a.parts[1].affordance_rank = 0;
  const auto vs = validate_asset(a);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].code, ViolationCode::AffordanceOutOfRange);
  EXPECT_EQ(vs[0].path, "parts[1].affordance_rank");
}

TEST(Validate, PrismaticWithPivot) {
  auto a = fixtures::drawer().asset;
  a.constraints[0].pivot = Vec3::Zero();
  const auto vs = validate_asset(a);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].code, ViolationCode::PivotForbiddenForPrismatic);
}

TEST(Validate, ReportsEveryViolation) {
  auto a = fixtures::laptop().asset;
  a.parts[0].material.density = -1;
  a.parts[1].material.poisson_ratio = 0.7;
  a.constraints[0].direction = Vec3(2, 0, 0);
  a.constraints[0].range = MotionRange{1.0, 0.0};
  const auto vs = validate_asset(a);
  EXPECT_TRUE(has_code(vs, ViolationCode::NegativeDensity));
  EXPECT_TRUE(has_code(vs, ViolationCode::PoissonOutOfRange));
  EXPECT_TRUE(has_code(vs, ViolationCode::DirectionNotUnit));
  EXPECT_TRUE(has_code(vs, ViolationCode::RangeInverted));
}

TEST(Validate, KindFieldRules) {
  KinematicConstraint c;
  c.kind = KinematicKind::C;
  c.parent_part = 1;
  c.child_part = 1;
  auto vs = validate_constraint(c);
  EXPECT_TRUE(has_code(vs, ViolationCode::ParentEqualsChild));
  EXPECT_TRUE(has_code(vs, ViolationCode::DirectionRequired));
  EXPECT_TRUE(has_code(vs, ViolationCode::PivotRequired));

  KinematicConstraint e;
  e.kind = KinematicKind::E;
  e.direction = Vec3::UnitX();
  EXPECT_TRUE(has_code(validate_constraint(e), ViolationCode::FieldForbiddenForKind));

  KinematicConstraint b;
  b.kind = KinematicKind::B;
  EXPECT_TRUE(has_code(validate_constraint(b), ViolationCode::MissingParentChild));
}

TEST(Validate, CoordinatesOutsideUnitCube) {
  auto a = fixtures::single_cube().asset;
  a.parts[0].mesh.vertices[0] *= 1.5;
  EXPECT_TRUE(has_code(validate_asset(a), ViolationCode::CoordinateOutOfRange));
  ValidationOptions raw;
  raw.require_normalized = false;
  EXPECT_TRUE(validate_asset(a, raw).empty());
}

TEST(Validate, NonConsecutiveIds) {
  auto a = fixtures::laptop().asset;
  a.parts[1].id = 3;
  a.constraints.clear();
  EXPECT_TRUE(has_code(validate_asset(a), ViolationCode::NonConsecutivePartIds));
}

TEST(AssetModel, KindCodesArePinned) {
  EXPECT_EQ(kind_code(KinematicKind::A), 0);
  EXPECT_EQ(kind_code(KinematicKind::B), 1);
  EXPECT_EQ(kind_code(KinematicKind::C), 2);
  EXPECT_EQ(kind_code(KinematicKind::D), 3);
  EXPECT_EQ(kind_code(KinematicKind::E), 4);
  EXPECT_EQ(kind_code(KinematicKind::CB), 5);
  for (auto k : kAllKinds) EXPECT_EQ(parse_kind(to_string(k)), k);
  EXPECT_FALSE(parse_kind("F").has_value());
}
