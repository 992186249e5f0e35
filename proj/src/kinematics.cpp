#include "physkit/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "physkit/error.hpp"
#include "physkit/nearest.hpp"
#include "physkit/rng.hpp"

namespace physkit {

std::vector<Vec3> ContactRegion::all_points() const {
  std::vector<Vec3> out = child_points.points;
  out.insert(out.end(), parent_points.points.begin(), parent_points.points.end());
  return out;
}

Vec3 ContactRegion::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : child_points.points) sum += p;
  for (const auto& p : parent_points.points) sum += p;
  const std::size_t n = child_points.points.size() + parent_points.points.size();
  return n == 0 ? sum : Vec3(sum / static_cast<double>(n));
}

ContactRegion contact_region(const PointCloud& child, const PointCloud& parent, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  if (child.points.empty() || parent.points.empty()) throw Error(Errc::EmptyGeometry, "contact_region needs non-empty clouds");
  const double tau_sq = tau * tau;
  ContactRegion region;
  region.tau = tau;
  region.child_points.source_part = child.source_part;
  region.parent_points.source_part = parent.source_part;
  const GridIndex parent_index(parent.points);
  for (const auto& p : child.points) {
    if (parent_index.nearest_sq_bounded(p, tau_sq).first <= tau_sq) region.child_points.points.push_back(p);
  }
  const GridIndex child_index(child.points);
  for (const auto& p : parent.points) {
    if (child_index.nearest_sq_bounded(p, tau_sq).first <= tau_sq) region.parent_points.points.push_back(p);
  }
  if (region.child_points.points.empty() && region.parent_points.points.empty()) {
    throw Error(Errc::NoContact, "parts " + std::to_string(child.source_part) + " and " +
                                     std::to_string(parent.source_part) + " have no points within tau");
  }
  return region;
}

Vec3 canonical_sign(const Vec3& v) {
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(v[a]) > std::abs(v[axis])) axis = a;
  }
  return v[axis] < 0.0 ? Vec3(-v) : v;
}

namespace {

Eigen::Matrix3d covariance(std::span<const Vec3> points, const Vec3& mean) {
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(points.size());
}

Vec3 mean_of(std::span<const Vec3> points) {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

}  // namespace

FittedPlane fit_plane(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error(Errc::DegenerateInput, "plane fit needs at least 3 points");
  const Vec3 centroid = mean_of(points);
  const Eigen::Matrix3d cov = covariance(points, centroid);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(Errc::DegenerateInput, "covariance eigen decomposition failed");
  const Vec3 evals = solver.eigenvalues();  // ascending
  if (!(evals[2] > 0.0) || evals[1] <= 1e-12 * evals[2]) {
    throw Error(Errc::DegenerateInput, "points are collinear or coincident");
  }
  FittedPlane plane;
  plane.normal = canonical_sign(solver.eigenvectors().col(0).normalized());
  plane.major_axis = canonical_sign(solver.eigenvectors().col(2).normalized());
  plane.centroid = centroid;
  plane.offset = plane.normal.dot(centroid);
  double sum_sq = 0.0;
  for (const auto& p : points) {
    const double r = plane.normal.dot(p - centroid);
    sum_sq += r * r;
  }
  plane.rms_residual = std::sqrt(sum_sq / static_cast<double>(points.size()));
  return plane;
}

std::string_view to_string(CandidateSource s) {
  switch (s) {
    case CandidateSource::PlaneSampled: return "plane_sampled";
    case CandidateSource::KMeansCenter: return "kmeans_center";
    case CandidateSource::Manual: return "manual";
  }
  return "manual";
}

std::optional<CandidateSource> parse_candidate_source(std::string_view text) {
  if (text == "plane_sampled") return CandidateSource::PlaneSampled;
  if (text == "kmeans_center") return CandidateSource::KMeansCenter;
  if (text == "manual") return CandidateSource::Manual;
  return std::nullopt;
}

std::vector<AxisCandidate> gen_axis_candidates(const FittedPlane& plane, const ContactRegion& /*region*/, int m,
                                               KinematicKind kind) {
  if (m < 1) throw Error(Errc::InvalidArgument, "m must be >= 1");
  const Vec3 major = plane.major_axis;
  const Vec3 minor = plane.normal.cross(major).normalized();
  std::vector<AxisCandidate> out;
  for (int i = 0; i < m; ++i) {
    const double theta = M_PI * i / m;
    AxisCandidate c;
    c.direction = canonical_sign((std::cos(theta) * major + std::sin(theta) * minor).normalized());
    c.provenance = CandidateSource::PlaneSampled;
    out.push_back(c);
  }
  if (kind == KinematicKind::B || kind == KinematicKind::CB) {
    AxisCandidate c;
    c.direction = plane.normal;
    c.provenance = CandidateSource::PlaneSampled;
    out.push_back(c);
  }
  return out;
}

ClusterSelection pivot_clusters(const ContactRegion& region, int k_max, const KinematicsConfig& config) {
  ClusterOptions options;
  options.k_max = k_max;
  options.restarts = config.kmeans_restarts;
  options.silhouette_cutoff = config.silhouette_cutoff;
  options.seed = derive_seed(config.seed, 0x6b6d);
  const auto points = region.all_points();
  return select_clusters(points, options);
}

std::vector<Vec3> pivot_candidates(const ContactRegion& region, int k_max, const KinematicsConfig& config) {
  return pivot_clusters(region, k_max, config).centers;
}

double line_support(std::span<const Vec3> points, const Vec3& origin, const Vec3& d, double radius) {
  if (points.empty()) return 0.0;
  const double r2 = radius * radius;
  std::size_t inside = 0;
  for (const auto& p : points) {
    const Vec3 v = p - origin;
    const double along = v.dot(d);
    if (v.squaredNorm() - along * along <= r2) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(points.size());
}

double mean_line_distance_sq(std::span<const Vec3> points, const Vec3& origin, const Vec3& d) {
  if (points.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : points) {
    const Vec3 v = p - origin;
    const double along = v.dot(d);
    sum += std::max(0.0, v.squaredNorm() - along * along);
  }
  return sum / static_cast<double>(points.size());
}

namespace {

double extent_term(const Eigen::Matrix3d& cov, const Vec3& d, KinematicKind kind) {
  const double total = cov.trace();
  if (!(total > 0.0)) return 0.0;
  const double along = std::max(0.0, d.dot(cov * d));
  switch (kind) {
    case KinematicKind::B:
      return std::sqrt(along / total);
    case KinematicKind::CB: {
      const Eigen::Matrix3d p = Eigen::Matrix3d::Identity() - d * d.transpose();
      const Eigen::Matrix3d across = p * cov * p;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(across, Eigen::EigenvaluesOnly);
      const double l1 = std::max(0.0, solver.eigenvalues()[1]);
      const double l2 = std::max(0.0, solver.eigenvalues()[2]);
      return (l1 + l2) > 0.0 ? 1.0 - std::abs(l2 - l1) / (l1 + l2) : 0.0;
    }
    default:
      return 1.0 - std::sqrt(std::max(0.0, total - along) / total);
  }
}

bool candidate_less(const AxisCandidate& a, const AxisCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.direction != b.direction) return lex_less(a.direction, b.direction);
  if (a.pivot.has_value() != b.pivot.has_value()) return !a.pivot.has_value();
  if (a.pivot && *a.pivot != *b.pivot) return lex_less(*a.pivot, *b.pivot);
  return false;
}

}  // namespace

std::vector<AxisCandidate> score_candidates(std::vector<AxisCandidate> cands, const ContactRegion& region,
                                            KinematicKind kind, const KinematicsConfig& config) {
  const auto points = region.all_points();
  if (points.empty()) throw Error(Errc::NoContact, "cannot score candidates on an empty region");
  const Vec3 centroid = mean_of(points);
  const Eigen::Matrix3d cov = covariance(points, centroid);
  for (auto& c : cands) {
    const Vec3 d = c.direction.normalized();
    c.alignment = d.cwiseAbs().maxCoeff();
    c.edge_support = line_support(points, c.pivot.value_or(centroid), d, config.edge_radius);
    c.extent = extent_term(cov, d, kind);
    c.score = config.weights.alignment * c.alignment + config.weights.edge_support * c.edge_support +
              config.weights.extent * c.extent;
  }
  std::stable_sort(cands.begin(), cands.end(), candidate_less);
  return cands;
}

MotionRange prismatic_range(const ObjectAsset& asset, int child_id, const Vec3& direction) {
  const Part* child = asset.find_part(child_id);
  if (!child) throw Error(Errc::UnknownPart, "no part with id " + std::to_string(child_id));
  const Vec3 d = direction.normalized();
  const double inf = std::numeric_limits<double>::infinity();
  double o_lo = inf, o_hi = -inf, c_lo = inf, c_hi = -inf;
  for (const auto& part : asset.parts) {
    for (const auto& v : part.mesh.vertices) {
      const double s = v.dot(d);
      o_lo = std::min(o_lo, s);
      o_hi = std::max(o_hi, s);
      if (part.id == child_id) {
        c_lo = std::min(c_lo, s);
        c_hi = std::max(c_hi, s);
      }
    }
  }
  if (c_lo > c_hi) throw Error(Errc::EmptyGeometry, "child part has no vertices");
  const double e = c_hi - c_lo;
  return MotionRange{std::max(o_lo - c_lo, -e), std::min(o_hi - c_hi, e)};
}

KinematicConstraint constraint_from_candidate(const ObjectAsset& asset, int child_id, int parent_id,
                                              KinematicKind kind, const AxisCandidate& candidate,
                                              const KinematicsConfig& config) {
  if (!has_parent_child(kind)) throw Error(Errc::InvalidArgument, "estimation only applies to B, C, D and CB");
  KinematicConstraint c;
  c.kind = kind;
  c.parent_part = parent_id;
  c.child_part = child_id;
  const Vec3 d = candidate.direction.normalized();
  if (requires_direction(kind)) c.direction = d;
  if (requires_pivot(kind)) {
    if (!candidate.pivot) throw Error(Errc::InvalidArgument, "selected candidate has no pivot");
    c.pivot = candidate.pivot;
  }
  if (kind == KinematicKind::B) {
    c.range = prismatic_range(asset, child_id, d);
  } else {
    c.range = config.default_rotation_range;
  }
  c.finalized = false;
  return c;
}

EstimateDetail estimate_detailed(const ObjectAsset& asset, int child_id, int parent_id, KinematicKind kind,
                                 const KinematicsConfig& config) {
  if (!has_parent_child(kind)) throw Error(Errc::InvalidArgument, "estimation only applies to B, C, D and CB");
  if (child_id == parent_id) throw Error(Errc::InvalidArgument, "child and parent must differ");
  EstimateDetail out;
  const PointCloud child = sample_part(asset, child_id, config.samples_per_part, config.seed);
  const PointCloud parent = sample_part(asset, parent_id, config.samples_per_part, config.seed);
  out.region = contact_region(child, parent, config.tau);
  const auto points = out.region.all_points();
  out.plane = fit_plane(points);
  std::vector<AxisCandidate> directions = gen_axis_candidates(out.plane, out.region, config.m, kind);

  std::vector<AxisCandidate> cands;
  if (kind == KinematicKind::B) {
    cands = directions;
  } else {
    out.clusters = pivot_clusters(out.region, config.k_max, config);
    const Vec3 centroid = out.region.centroid();
    for (const auto& dir : directions) {
      AxisCandidate c = dir;
      c.pivot = centroid;
      c.provenance = CandidateSource::PlaneSampled;
      cands.push_back(c);
      for (const auto& center : out.clusters.centers) {
        c.pivot = center;
        c.provenance = CandidateSource::KMeansCenter;
        cands.push_back(c);
      }
    }
  }
  out.candidates = score_candidates(std::move(cands), out.region, kind, config);

  AxisCandidate chosen = out.candidates.front();
  if (kind == KinematicKind::D) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.clusters.sizes.size(); ++i) {
      if (out.clusters.sizes[i] > out.clusters.sizes[best]) best = i;
    }
    chosen.pivot = out.clusters.centers[best];
  } else if (kind != KinematicKind::B) {
    double best_support = 0.0;
    for (const auto& c : out.candidates) {
      if (c.direction == chosen.direction) best_support = std::max(best_support, c.edge_support);
    }
    double best_fit = std::numeric_limits<double>::infinity();
    for (const auto& c : out.candidates) {
      if (c.direction != chosen.direction || c.edge_support < best_support - config.pivot_support_slack) continue;
      const double fit = mean_line_distance_sq(points, *c.pivot, c.direction);
      if (fit < best_fit) {
        best_fit = fit;
        chosen.pivot = c.pivot;
      }
    }
  }
  out.constraint = constraint_from_candidate(asset, child_id, parent_id, kind, chosen, config);
  return out;
}

KinematicConstraint estimate_constraint(const ObjectAsset& asset, int child_id, int parent_id, KinematicKind kind,
                                        const KinematicsConfig& config) {
  return estimate_detailed(asset, child_id, parent_id, kind, config).constraint;
}

nlohmann::json candidate_to_json(const AxisCandidate& c) {
  using nlohmann::json;
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  return json{{"direction", vec(c.direction)},
              {"pivot", c.pivot ? vec(*c.pivot) : json(nullptr)},
              {"score", c.score},
              {"provenance", std::string(to_string(c.provenance))},
              {"alignment", c.alignment},
              {"edge_support", c.edge_support},
              {"extent", c.extent}};
}

AxisCandidate candidate_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& v, const char* what) {
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number()) {
      throw Error(Errc::SchemaViolation, fmt::format("candidate.{}: expected a 3-vector", what));
    }
    return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  };
  if (!j.is_object() || !j.contains("direction")) throw Error(Errc::SchemaViolation, "candidate.direction: missing field");
  AxisCandidate c;
  c.direction = vec(j["direction"], "direction");
  if (j.contains("pivot") && !j["pivot"].is_null()) c.pivot = vec(j["pivot"], "pivot");
  auto num = [&](const char* key) {
    if (!j.contains(key)) return 0.0;
    if (!j[key].is_number()) throw Error(Errc::SchemaViolation, fmt::format("candidate.{}: expected a number", key));
    return j[key].get<double>();
  };
  c.score = num("score");
  c.alignment = num("alignment");
  c.edge_support = num("edge_support");
  c.extent = num("extent");
  c.provenance = CandidateSource::Manual;
  if (j.contains("provenance")) {
    const auto p = j["provenance"].is_string() ? parse_candidate_source(j["provenance"].get<std::string>()) : std::nullopt;
    if (!p) throw Error(Errc::SchemaViolation, "candidate.provenance: unknown source");
    c.provenance = *p;
  }
  return c;
}

}  // namespace physkit
