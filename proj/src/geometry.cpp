#include "physkit/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "physkit/error.hpp"
#include "physkit/nearest.hpp"
#include "physkit/rng.hpp"
#include "physkit/validate.hpp"

namespace physkit {

NormalizeTransform normalization_transform(const ObjectAsset& asset) {
  const Aabb box = asset.bounds();
  if (box.empty()) throw Error(Errc::EmptyGeometry, "asset has no vertices");
  NormalizeTransform t;
  t.center = box.center();
  t.half_extent = 0.5 * box.size().maxCoeff();
  if (!(t.half_extent > 0.0)) throw Error(Errc::DegenerateInput, "asset bounding box has zero extent");
  return t;
}

ObjectAsset apply_normalization(ObjectAsset asset, const NormalizeTransform& t) {
  for (auto& part : asset.parts) {
    for (auto& v : part.mesh.vertices) v = t.apply(v);
  }
  for (auto& c : asset.constraints) {
    if (c.pivot) c.pivot = t.apply(*c.pivot);
    if (c.range && c.kind == KinematicKind::B) {
      c.range = MotionRange{c.range->lo / t.half_extent, c.range->hi / t.half_extent};
    }
  }
  return asset;
}

ObjectAsset normalize_object(const ObjectAsset& asset) {
  return apply_normalization(asset, normalization_transform(asset));
}

bool is_tiny(const TriangleMesh& mesh, const MergePolicy& policy) {
  const double area = mesh.area();
  return merge_rule(area <= policy.area_threshold_hard, area <= policy.area_threshold_soft,
                    static_cast<long>(mesh.faces.size()) <= policy.face_threshold);
}

SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  if (mesh.faces.empty() || !(total > 0.0)) throw Error(Errc::EmptyGeometry, "cannot sample a mesh with no area");
  Rng rng(seed);
  SurfaceSamples out;
  out.points.reserve(n);
  out.faces.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    std::size_t f = static_cast<std::size_t>(it - cumulative.begin());
    if (f >= mesh.faces.size()) f = mesh.faces.size() - 1;
    // Skip zero-area faces that upper_bound can land on only through rounding.
    while (mesh.face_area(f) <= 0.0 && f + 1 < mesh.faces.size()) ++f;
    const auto& face = mesh.faces[f];
    const double s = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3& a = mesh.vertices[face[0]];
    const Vec3& b = mesh.vertices[face[1]];
    const Vec3& c = mesh.vertices[face[2]];
    out.points.push_back((1.0 - s) * a + (s * (1.0 - r2)) * b + (s * r2) * c);
    out.faces.push_back(f);
  }
  return out;
}

PointCloud surface_sample(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, int source_part) {
  if (n == 0) throw Error(Errc::InvalidArgument, "surface_sample needs n >= 1");
  PointCloud cloud;
  cloud.points = sample_surface(mesh, n, seed).points;
  cloud.source_part = source_part;
  return cloud;
}

PointCloud sample_part(const ObjectAsset& asset, int part_id, std::size_t n, std::uint64_t seed) {
  const Part* part = asset.find_part(part_id);
  if (!part) throw Error(Errc::UnknownPart, "no part with id " + std::to_string(part_id));
  return surface_sample(part->mesh, n, derive_seed(seed, static_cast<std::uint64_t>(part_id)), part_id);
}

ObjectSamples sample_object(const ObjectAsset& asset, std::size_t n, std::uint64_t seed) {
  TriangleMesh combined;
  std::vector<int> face_owner;
  for (const auto& part : asset.parts) {
    combined.append(part.mesh);
    face_owner.insert(face_owner.end(), part.mesh.faces.size(), part.id);
  }
  SurfaceSamples samples = sample_surface(combined, n, seed);
  ObjectSamples out;
  out.points = std::move(samples.points);
  out.part_ids.reserve(n);
  for (std::size_t f : samples.faces) out.part_ids.push_back(face_owner[f]);
  return out;
}

namespace {

struct WorkingPart {
  Part part;
  int original_id;
  std::vector<Vec3> cloud;
  bool alive = true;
};

std::size_t contact_count(const std::vector<Vec3>& tiny, const GridIndex& other) {
  const double limit = kAdjacencyDistance * kAdjacencyDistance;
  std::size_t count = 0;
  for (const auto& p : tiny) {
    if (other.nearest_sq_bounded(p, limit).first < limit) ++count;
  }
  return count;
}

}  // namespace

MergeResult merge_tiny_parts(const ObjectAsset& asset, const MergePolicy& policy, std::uint64_t seed) {
  if (policy.area_threshold_hard < 0 || policy.area_threshold_soft < 0 || policy.face_threshold < 0) {
    throw Error(Errc::InvalidArgument, "merge thresholds must be non-negative");
  }
  std::vector<WorkingPart> work;
  for (const auto& part : asset.parts) {
    WorkingPart w{part, part.id, {}, true};
    w.cloud = surface_sample(part.mesh, kAdjacencySamples, derive_seed(seed, static_cast<std::uint64_t>(part.id))).points;
    work.push_back(std::move(w));
  }

  MergeResult result;
  std::map<int, int> absorbed_into;  // original id -> original id of absorber
  std::vector<bool> isolated(work.size(), false);
  for (;;) {
    std::vector<std::size_t> tiny;
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (work[i].alive && !isolated[i] && is_tiny(work[i].part.mesh, policy)) tiny.push_back(i);
    }
    if (tiny.empty()) break;
    std::vector<double> areas(work.size(), 0.0);
    for (std::size_t i : tiny) areas[i] = work[i].part.mesh.area();
    std::stable_sort(tiny.begin(), tiny.end(), [&](std::size_t a, std::size_t b) {
      if (areas[a] != areas[b]) return areas[a] < areas[b];
      return work[a].original_id < work[b].original_id;
    });

    const std::size_t t = tiny.front();
    std::size_t best = work.size();
    std::size_t best_count = 0;
    for (std::size_t j = 0; j < work.size(); ++j) {
      if (j == t || !work[j].alive) continue;
      GridIndex index(work[j].cloud);
      const std::size_t count = contact_count(work[t].cloud, index);
      if (count > best_count || (count == best_count && count > 0 && work[j].original_id < work[best].original_id)) {
        best = j;
        best_count = count;
      }
    }
    if (best == work.size()) {
      isolated[t] = true;
      result.isolated.push_back(work[t].original_id);
      spdlog::warn("part {} is below the merge thresholds but has no adjacent part; left unmerged",
                   work[t].original_id);
      continue;
    }
    work[best].part.mesh.append(work[t].part.mesh);
    work[best].cloud.insert(work[best].cloud.end(), work[t].cloud.begin(), work[t].cloud.end());
    work[t].alive = false;
    absorbed_into[work[t].original_id] = work[best].original_id;
    result.absorbed.emplace_back(work[t].original_id, work[best].original_id);
  }
  std::sort(result.isolated.begin(), result.isolated.end());

  ObjectAsset out = asset;
  out.parts.clear();
  std::map<int, int> surviving;  // original id -> new id
  for (const auto& w : work) {
    if (!w.alive) continue;
    Part p = w.part;
    p.id = static_cast<int>(out.parts.size()) + 1;
    surviving[w.original_id] = p.id;
    out.parts.push_back(std::move(p));
  }
  for (const auto& part : asset.parts) {
    int root = part.id;
    while (absorbed_into.count(root)) root = absorbed_into.at(root);
    result.id_map[part.id] = surviving.at(root);
  }

  out.constraints.clear();
  for (auto c : asset.constraints) {
    auto remap = [&](std::optional<int>& ref) {
      if (ref && result.id_map.count(*ref)) ref = result.id_map.at(*ref);
    };
    remap(c.parent_part);
    remap(c.child_part);
    if (c.parent_part && c.child_part && *c.parent_part == *c.child_part) continue;
    if (std::find(out.constraints.begin(), out.constraints.end(), c) != out.constraints.end()) continue;
    out.constraints.push_back(c);
  }

  const auto violations = validate_asset(out);
  if (!violations.empty()) {
    throw Error(Errc::ValidationError, "merged asset failed validation:\n" + format_violations(violations));
  }
  result.asset = std::move(out);
  return result;
}

}  // namespace physkit
