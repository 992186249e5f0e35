#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "physkit/asset.hpp"

namespace physkit {

struct ViewSpec {
  Vec3 eye = Vec3(0, -2.8, 0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3::UnitZ();
  double fov_deg = 40.0;  // vertical
  int width = 512;
  int height = 512;

  bool operator==(const ViewSpec&) const = default;
};

/// Throws InvalidArgument when the view cannot define a camera.
void validate_view(const ViewSpec& view);

enum class Channel {
  Scale,
  Density,
  Affordance,
  KinType,
  KinDirection,
  KinPivot,
  KinRange,
  PartIndex,
  Color,
  Depth,
  Mask,
};

inline constexpr Channel kPropertyChannels[] = {Channel::Scale,   Channel::Density,      Channel::Affordance,
                                                Channel::KinType, Channel::KinDirection, Channel::KinPivot,
                                                Channel::KinRange};

std::string_view to_string(Channel c);
std::optional<Channel> parse_channel(std::string_view text);
int channel_width(Channel c);

inline constexpr float kBackground = -1.0f;

/// Row-major, row 0 at the top; `pixels[(y * width + x) * channels + c]`.
struct PropertyImage {
  Channel channel = Channel::Mask;
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> pixels;
  ViewSpec view;

  float at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::array<std::uint8_t, 3> at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  bool operator==(const RgbImage&) const = default;
};

/// Visible surface per pixel after the depth test.
struct Fragments {
  int width = 0;
  int height = 0;
  std::vector<int> part_id;  // 0 = background
  std::vector<int> face;     // index into the owning part's faces, -1 = background
  std::vector<double> depth; // distance along the view axis
  std::vector<float> shade;  // flat Lambert factor in [0, 1]

  bool foreground(std::size_t i) const { return part_id[i] != 0; }
};

/// Perspective projection, top-left fill rule at pixel centers,
/// perspective-correct depth, strict less-than depth test (earlier faces win ties).
Fragments rasterize_fragments(const ObjectAsset& asset, const ViewSpec& view);

/// Per-part attribute fill of one channel from a fragment buffer.
PropertyImage fill_channel(const ObjectAsset& asset, const Fragments& frags, const ViewSpec& view, Channel channel);

PropertyImage rasterize(const ObjectAsset& asset, const ViewSpec& view, Channel channel);

/// Flat-shaded color render on a white background.
RgbImage render_color(const ObjectAsset& asset, const ViewSpec& view);

inline constexpr std::array<std::uint8_t, 3> kIsolationTarget = {255, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kIsolationOther = {128, 128, 128};
inline constexpr std::array<std::uint8_t, 3> kIsolationBackground = {255, 255, 255};

/// Target part red, everything else grey, white background; unshaded. Throws UnknownPart.
RgbImage render_isolation(const ObjectAsset& asset, int part_id, const ViewSpec& view);

std::size_t count_pixels(const RgbImage& image, const std::array<std::uint8_t, 3>& color);

/// Eight azimuths at 45 degrees and 30 degrees elevation, then top and bottom.
std::vector<ViewSpec> default_property_views(int resolution = 512);
/// Area-uniform eye directions on the sphere, radius 2.8.
std::vector<ViewSpec> random_sphere_views(int n, std::uint64_t seed, int resolution = 512);

inline constexpr double kViewRadius = 2.8;

}  // namespace physkit
