#pragma once

#include <filesystem>
#include <string>

#include "physkit/render.hpp"

namespace physkit {

/// 8-bit RGB PNG.
std::string encode_png(const RgbImage& image);
void write_png(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

/// NumPy .npy v1.0, dtype '<f4', C order, shape (height, width, channels).
/// Channel identity is not stored; read_npy leaves it as Mask unless told.
void write_npy(const PropertyImage& image, const std::filesystem::path& path);
PropertyImage read_npy(const std::filesystem::path& path, Channel channel = Channel::Mask);

}  // namespace physkit
