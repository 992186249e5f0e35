#include "physkit/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "physkit/error.hpp"
#include "physkit/rng.hpp"

namespace physkit {

namespace {

constexpr double kNear = 1e-6;

struct Camera {
  Vec3 eye, right, up, forward;
  double focal = 1.0;
  double cx = 0.0, cy = 0.0;

  explicit Camera(const ViewSpec& v) {
    eye = v.eye;
    forward = (v.look_at - v.eye).normalized();
    right = forward.cross(v.up).normalized();
    up = right.cross(forward);
    focal = 0.5 * v.height / std::tan(0.5 * v.fov_deg * M_PI / 180.0);
    cx = 0.5 * v.width;
    cy = 0.5 * v.height;
  }
};

struct Projected {
  double x, y, z;  // pixel coordinates and view-axis depth
};

// Ties on an edge go to exactly one of two triangles sharing it, because the
// shared edge appears with opposite direction in each.
bool owns_edge(double dx, double dy) { return dy > 0.0 || (dy == 0.0 && dx < 0.0); }

double edge(const Projected& a, const Projected& b, double px, double py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

std::array<std::uint8_t, 3> part_color(int part_id) {
  // Golden-ratio hue walk, fixed saturation/value.
  const double h = std::fmod(0.61803398875 * part_id, 1.0) * 6.0;
  const double s = 0.5, v = 0.9;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = v, g = t, b = p;
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  auto to8 = [](double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

const KinematicConstraint* joint_of(const ObjectAsset& asset, int part_id) {
  return asset.constraint_for_child(part_id);
}

}  // namespace

void validate_view(const ViewSpec& view) {
  const Vec3 f = view.look_at - view.eye;
  if (!(f.norm() > 0.0)) throw Error(Errc::InvalidArgument, "view eye coincides with look_at");
  if (!(f.normalized().cross(view.up).norm() > 1e-9)) throw Error(Errc::InvalidArgument, "view up is parallel to the view direction");
  if (view.width < 16 || view.height < 16) throw Error(Errc::InvalidArgument, "view resolution must be at least 16x16");
  if (!(view.fov_deg > 0.0 && view.fov_deg < 180.0)) throw Error(Errc::InvalidArgument, "fov must be in (0, 180) degrees");
}

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::Scale: return "scale";
    case Channel::Density: return "density";
    case Channel::Affordance: return "affordance";
    case Channel::KinType: return "kin_type";
    case Channel::KinDirection: return "kin_direction";
    case Channel::KinPivot: return "kin_pivot";
    case Channel::KinRange: return "kin_range";
    case Channel::PartIndex: return "part_index";
    case Channel::Color: return "color";
    case Channel::Depth: return "depth";
    case Channel::Mask: return "mask";
  }
  return "mask";
}

std::optional<Channel> parse_channel(std::string_view text) {
  for (Channel c : {Channel::Scale, Channel::Density, Channel::Affordance, Channel::KinType, Channel::KinDirection,
                    Channel::KinPivot, Channel::KinRange, Channel::PartIndex, Channel::Color, Channel::Depth,
                    Channel::Mask}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

int channel_width(Channel c) {
  switch (c) {
    case Channel::KinDirection:
    case Channel::KinPivot:
    case Channel::Color: return 3;
    case Channel::KinRange: return 2;
    default: return 1;
  }
}

Fragments rasterize_fragments(const ObjectAsset& asset, const ViewSpec& view) {
  validate_view(view);
  const Camera cam(view);
  const Vec3 light = (-cam.forward + 0.5 * cam.up + 0.3 * cam.right).normalized();

  Fragments fr;
  fr.width = view.width;
  fr.height = view.height;
  const std::size_t n = static_cast<std::size_t>(view.width) * view.height;
  fr.part_id.assign(n, 0);
  fr.face.assign(n, -1);
  fr.depth.assign(n, std::numeric_limits<double>::infinity());
  fr.shade.assign(n, 0.0f);

  std::vector<Projected> proj;
  for (const Part& part : asset.parts) {
    const TriangleMesh& mesh = part.mesh;
    proj.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const Vec3 v = mesh.vertices[i] - cam.eye;
      const double z = v.dot(cam.forward);
      const double inv = z > kNear ? 1.0 / z : 0.0;
      proj[i] = {cam.cx + cam.focal * v.dot(cam.right) * inv, cam.cy - cam.focal * v.dot(cam.up) * inv, z};
    }
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const Face& tri = mesh.faces[f];
      Projected a = proj[tri[0]], b = proj[tri[1]], c = proj[tri[2]];
      // Triangles crossing the near plane are dropped rather than clipped.
      if (a.z <= kNear || b.z <= kNear || c.z <= kNear) continue;
      double area = edge(a, b, c.x, c.y);
      if (area == 0.0 || !std::isfinite(area)) continue;
      if (area < 0.0) {
        std::swap(b, c);
        area = -area;
      }
      const Vec3 cross = mesh.face_cross(f);
      const double cn = cross.norm();
      const float shade =
          cn > 0.0 ? static_cast<float>(0.2 + 0.8 * std::abs(cross.dot(light) / cn)) : 0.2f;

      const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
      const int x1 = std::min(view.width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
      const int y1 = std::min(view.height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));
      const bool own_bc = owns_edge(c.x - b.x, c.y - b.y);
      const bool own_ca = owns_edge(a.x - c.x, a.y - c.y);
      const bool own_ab = owns_edge(b.x - a.x, b.y - a.y);
      for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
          const double px = x + 0.5;
          const double w0 = edge(b, c, px, py);
          const double w1 = edge(c, a, px, py);
          const double w2 = edge(a, b, px, py);
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
          if ((w0 == 0.0 && !own_bc) || (w1 == 0.0 && !own_ca) || (w2 == 0.0 && !own_ab)) continue;
          const double inv_z = (w0 / a.z + w1 / b.z + w2 / c.z) / area;
          const double z = 1.0 / inv_z;
          const std::size_t idx = static_cast<std::size_t>(y) * view.width + x;
          if (z < fr.depth[idx]) {
            fr.depth[idx] = z;
            fr.part_id[idx] = part.id;
            fr.face[idx] = static_cast<int>(f);
            fr.shade[idx] = shade;
          }
        }
      }
    }
  }
  return fr;
}

PropertyImage fill_channel(const ObjectAsset& asset, const Fragments& frags, const ViewSpec& view, Channel channel) {
  PropertyImage img;
  img.channel = channel;
  img.width = frags.width;
  img.height = frags.height;
  img.channels = channel_width(channel);
  img.view = view;
  const std::size_t n = static_cast<std::size_t>(frags.width) * frags.height;
  img.pixels.assign(n * img.channels, channel == Channel::Mask ? 0.0f : kBackground);

  // Per-part attribute rows, looked up by part id.
  std::vector<std::pair<int, std::array<float, 3>>> table;
  for (const Part& p : asset.parts) {
    std::array<float, 3> v{0.0f, 0.0f, 0.0f};
    const KinematicConstraint* k = joint_of(asset, p.id);
    switch (channel) {
      case Channel::Scale: v[0] = static_cast<float>(asset.absolute_scale.max_dim()); break;
      case Channel::Density: v[0] = static_cast<float>(p.material.density); break;
      case Channel::Affordance: v[0] = static_cast<float>(p.affordance_rank); break;
      case Channel::KinType: v[0] = static_cast<float>(kind_code(k ? k->kind : KinematicKind::E)); break;
      case Channel::KinDirection:
        if (k && k->direction) v = {float(k->direction->x()), float(k->direction->y()), float(k->direction->z())};
        break;
      case Channel::KinPivot:
        if (k && k->pivot) v = {float(k->pivot->x()), float(k->pivot->y()), float(k->pivot->z())};
        break;
      case Channel::KinRange:
        if (k && k->range) v = {float(k->range->lo), float(k->range->hi), 0.0f};
        break;
      case Channel::PartIndex: v[0] = static_cast<float>(p.id); break;
      case Channel::Color: {
        const auto c = part_color(p.id);
        v = {c[0] / 255.0f, c[1] / 255.0f, c[2] / 255.0f};
        break;
      }
      case Channel::Depth:
      case Channel::Mask: break;
    }
    table.emplace_back(p.id, v);
  }
  auto lookup = [&](int id) -> const std::array<float, 3>& {
    for (const auto& [pid, v] : table) {
      if (pid == id) return v;
    }
    throw Error(Errc::UnknownPart, "fragment refers to missing part " + std::to_string(id));
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (!frags.foreground(i)) continue;
    float* out = &img.pixels[i * img.channels];
    switch (channel) {
      case Channel::Depth: out[0] = static_cast<float>(frags.depth[i]); break;
      case Channel::Mask: out[0] = 1.0f; break;
      case Channel::Color: {
        const auto& v = lookup(frags.part_id[i]);
        for (int c = 0; c < 3; ++c) {
          out[c] = std::round(v[c] * frags.shade[i] * 255.0f) / 255.0f;
        }
        break;
      }
      default: {
        const auto& v = lookup(frags.part_id[i]);
        for (int c = 0; c < img.channels; ++c) out[c] = v[c];
      }
    }
  }
  return img;
}

PropertyImage rasterize(const ObjectAsset& asset, const ViewSpec& view, Channel channel) {
  return fill_channel(asset, rasterize_fragments(asset, view), view, channel);
}

RgbImage render_color(const ObjectAsset& asset, const ViewSpec& view) {
  const PropertyImage img = rasterize(asset, view, Channel::Color);
  RgbImage out;
  out.width = img.width;
  out.height = img.height;
  out.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);
  for (std::size_t i = 0; i < out.rgb.size(); ++i) {
    const float v = img.pixels[i];
    if (v >= 0.0f) out.rgb[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

RgbImage render_isolation(const ObjectAsset& asset, int part_id, const ViewSpec& view) {
  if (!asset.find_part(part_id)) throw Error(Errc::UnknownPart, "no part " + std::to_string(part_id));
  const Fragments fr = rasterize_fragments(asset, view);
  RgbImage out;
  out.width = fr.width;
  out.height = fr.height;
  out.rgb.resize(static_cast<std::size_t>(fr.width) * fr.height * 3);
  for (std::size_t i = 0; i < fr.part_id.size(); ++i) {
    const auto& c = !fr.foreground(i) ? kIsolationBackground
                    : fr.part_id[i] == part_id ? kIsolationTarget
                                               : kIsolationOther;
    std::copy(c.begin(), c.end(), out.rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return out;
}

std::size_t count_pixels(const RgbImage& image, const std::array<std::uint8_t, 3>& color) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 2 < image.rgb.size(); i += 3) {
    if (image.rgb[i] == color[0] && image.rgb[i + 1] == color[1] && image.rgb[i + 2] == color[2]) ++count;
  }
  return count;
}

std::vector<ViewSpec> default_property_views(int resolution) {
  std::vector<ViewSpec> views;
  const double elev = 30.0 * M_PI / 180.0;
  for (int i = 0; i < 8; ++i) {
    const double az = i * 45.0 * M_PI / 180.0;
    ViewSpec v;
    v.eye = kViewRadius * Vec3(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
    v.width = v.height = resolution;
    views.push_back(v);
  }
  for (double s : {1.0, -1.0}) {
    ViewSpec v;
    v.eye = Vec3(0, 0, s * kViewRadius);
    v.up = Vec3::UnitY();
    v.width = v.height = resolution;
    views.push_back(v);
  }
  return views;
}

std::vector<ViewSpec> random_sphere_views(int n, std::uint64_t seed, int resolution) {
  if (n < 1) throw Error(Errc::InvalidArgument, "random_sphere_views needs n >= 1");
  Rng rng(seed);
  std::vector<ViewSpec> views;
  views.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(views.size()) < n) {
    const Vec3 g(rng.normal(), rng.normal(), rng.normal());
    const double len = g.norm();
    if (!(len > 1e-12)) continue;
    ViewSpec v;
    v.eye = kViewRadius * g / len;
    v.up = std::abs(g.z() / len) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
    v.width = v.height = resolution;
    views.push_back(v);
  }
  return views;
}

}  // namespace physkit
