#include "physkit/asset.hpp"

#include <algorithm>

#include "physkit/error.hpp"

namespace physkit {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::MeshParseError: return "MeshParseError";
    case Errc::IoError: return "IoError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::EmptyGeometry: return "EmptyGeometry";
    case Errc::NoAdjacentPart: return "NoAdjacentPart";
    case Errc::NoContact: return "NoContact";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::UnknownPart: return "UnknownPart";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::RateLimited: return "RateLimited";
    case Errc::Timeout: return "Timeout";
    case Errc::UnparseableResponse: return "UnparseableResponse";
    case Errc::LabelMismatch: return "LabelMismatch";
    case Errc::InvalidTransition: return "InvalidTransition";
    case Errc::NoCompatibleRegion: return "NoCompatibleRegion";
    case Errc::ScaleOutOfBounds: return "ScaleOutOfBounds";
    case Errc::ValidationFailure: return "ValidationFailure";
    case Errc::UnannotatedPart: return "UnannotatedPart";
    case Errc::WrongArity: return "WrongArity";
    case Errc::EmbedderUnavailable: return "EmbedderUnavailable";
    case Errc::Divergence: return "Divergence";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::string_view to_string(KinematicKind kind) {
  switch (kind) {
    case KinematicKind::A: return "A";
    case KinematicKind::B: return "B";
    case KinematicKind::C: return "C";
    case KinematicKind::D: return "D";
    case KinematicKind::E: return "E";
    case KinematicKind::CB: return "CB";
  }
  return "?";
}

std::optional<KinematicKind> parse_kind(std::string_view text) {
  for (auto k : kAllKinds) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

Vec3 TriangleMesh::face_cross(std::size_t f) const {
  const auto& t = faces[f];
  const Vec3& a = vertices[t[0]];
  return (vertices[t[1]] - a).cross(vertices[t[2]] - a);
}

double TriangleMesh::face_area(std::size_t f) const { return 0.5 * face_cross(f).norm(); }

Vec3 TriangleMesh::face_centroid(std::size_t f) const {
  const auto& t = faces[f];
  return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
}

double TriangleMesh::area() const {
  double total = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) total += face_area(f);
  return total;
}

Aabb TriangleMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

void TriangleMesh::append(const TriangleMesh& other) {
  const int offset = static_cast<int>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  faces.reserve(faces.size() + other.faces.size());
  for (const auto& f : other.faces) faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
}

double AbsoluteScale::max_dim() const { return std::max({length_cm, width_cm, height_cm}); }

const Part* ObjectAsset::find_part(int id) const {
  auto it = std::find_if(parts.begin(), parts.end(), [id](const Part& p) { return p.id == id; });
  return it == parts.end() ? nullptr : &*it;
}

Part* ObjectAsset::find_part(int id) {
  auto it = std::find_if(parts.begin(), parts.end(), [id](const Part& p) { return p.id == id; });
  return it == parts.end() ? nullptr : &*it;
}

Aabb ObjectAsset::bounds() const {
  Aabb box;
  for (const auto& p : parts) box.extend(p.mesh.bounds());
  return box;
}

const KinematicConstraint* ObjectAsset::constraint_for_child(int part_id) const {
  for (const auto& c : constraints) {
    if (c.child_part && *c.child_part == part_id) return &c;
  }
  return nullptr;
}

}  // namespace physkit
