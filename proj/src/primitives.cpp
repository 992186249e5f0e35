#include "physkit/primitives.hpp"

#include <cmath>

namespace physkit::primitives {

TriangleMesh quad(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  TriangleMesh m;
  m.vertices = {p0, p1, p2, p3};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

TriangleMesh box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  // Vertex index bits: x = 1, y = 2, z = 4.
  m.faces = {
      {0, 2, 3}, {0, 3, 1},  // z-
      {4, 5, 7}, {4, 7, 6},  // z+
      {0, 1, 5}, {0, 5, 4},  // y-
      {2, 6, 7}, {2, 7, 3},  // y+
      {0, 4, 6}, {0, 6, 2},  // x-
      {1, 3, 7}, {1, 7, 5},  // x+
  };
  return m;
}

TriangleMesh cylinder(const Vec3& base_center, double radius, double height, int segments) {
  TriangleMesh m;
  const Vec3 top_center = base_center + Vec3(0, 0, height);
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * M_PI * i / segments;
    const Vec3 offset(radius * std::cos(a), radius * std::sin(a), 0.0);
    m.vertices.push_back(base_center + offset);
    m.vertices.push_back(top_center + offset);
  }
  const int bottom = static_cast<int>(m.vertices.size());
  m.vertices.push_back(base_center);
  const int top = bottom + 1;
  m.vertices.push_back(top_center);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    const int b0 = 2 * i, t0 = 2 * i + 1, b1 = 2 * j, t1 = 2 * j + 1;
    m.faces.push_back({b0, b1, t1});
    m.faces.push_back({b0, t1, t0});
    m.faces.push_back({bottom, b1, b0});
    m.faces.push_back({top, t0, t1});
  }
  return m;
}

TriangleMesh uv_sphere(const Vec3& center, double radius, int rings, int segments) {
  TriangleMesh m;
  m.vertices.push_back(center + Vec3(0, 0, radius));
  for (int r = 1; r < rings; ++r) {
    const double polar = M_PI * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double az = 2.0 * M_PI * s / segments;
      m.vertices.push_back(center + radius * Vec3(std::sin(polar) * std::cos(az),
                                                  std::sin(polar) * std::sin(az), std::cos(polar)));
    }
  }
  const int south = static_cast<int>(m.vertices.size());
  m.vertices.push_back(center - Vec3(0, 0, radius));
  auto ring_vertex = [segments](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) m.faces.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
      const int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
      m.faces.push_back({a, c, d});
      m.faces.push_back({a, d, b});
    }
  }
  for (int s = 0; s < segments; ++s) {
    m.faces.push_back({south, ring_vertex(rings - 1, s + 1), ring_vertex(rings - 1, s)});
  }
  return m;
}

TriangleMesh transformed(TriangleMesh mesh, const Eigen::Matrix3d& rotation, const Vec3& translation) {
  for (auto& v : mesh.vertices) v = rotation * v + translation;
  return mesh;
}

TriangleMesh merged(std::initializer_list<TriangleMesh> meshes) {
  TriangleMesh out;
  for (const auto& m : meshes) out.append(m);
  return out;
}

}  // namespace physkit::primitives
