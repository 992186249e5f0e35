#pragma once

#include "physkit/asset.hpp"

namespace physkit::primitives {

// Closed meshes with outward-facing (counter-clockwise) winding.

TriangleMesh box(const Vec3& lo, const Vec3& hi);
/// Cylinder along +z from `base_center` with the given height.
TriangleMesh cylinder(const Vec3& base_center, double radius, double height, int segments = 32);
TriangleMesh uv_sphere(const Vec3& center, double radius, int rings = 16, int segments = 32);
/// Single quad split into two triangles (p0, p1, p2, p3 counter-clockwise).
TriangleMesh quad(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3);

TriangleMesh transformed(TriangleMesh mesh, const Eigen::Matrix3d& rotation, const Vec3& translation);
TriangleMesh merged(std::initializer_list<TriangleMesh> meshes);

}  // namespace physkit::primitives
