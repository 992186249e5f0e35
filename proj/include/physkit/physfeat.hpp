#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "physkit/asset.hpp"

namespace physkit {

// Field widths of the packed per-voxel record.
inline constexpr int kScaleWidth = 1;
inline constexpr int kAffordanceWidth = 1;
inline constexpr int kDensityWidth = 1;
inline constexpr int kKinematicWidth = 1 + 1 + 3 + 3 + 2 + 1;  // child, parent, dir, loc, range, type
inline constexpr int kPhysChannels = kScaleWidth + kAffordanceWidth + kDensityWidth + kKinematicWidth;
static_assert(kKinematicWidth == 11);
static_assert(kPhysChannels == 14);

struct PhysRecord {
  double scale = 0.0;       // max(L, W, H) in cm
  double affordance = 0.0;  // rank 1..10
  double density = 0.0;     // g/cm^3
  double kin_child = 0.0;   // part id
  double kin_parent = 0.0;  // part id
  std::array<double, 3> kin_direction{};
  std::array<double, 3> kin_location{};
  std::array<double, 2> kin_range{};
  double kin_type = 0.0;    // KinematicKind code

  bool operator==(const PhysRecord&) const = default;
};
static_assert(sizeof(PhysRecord) == kPhysChannels * sizeof(double), "PhysRecord must stay a flat 14-double record");

using PhysVector = std::array<double, kPhysChannels>;

/// Channel names in packed order ("scale", ..., "kin_dir_x", ..., "kin_type").
const std::array<std::string_view, kPhysChannels>& phys_channel_names();

PhysVector pack_phys(const PhysRecord& rec);
/// WrongArity unless `v` has exactly 14 entries.
PhysRecord unpack_phys(std::span<const double> v);

inline constexpr int kEmbeddingDim = 768;
/// Basic, functional and kinematic description embeddings, each L2-normalized.
using SemEmbedding = std::array<std::vector<double>, 3>;

struct VoxelGrid {
  int resolution = 64;
  std::vector<std::array<int, 3>> occupied;  // sorted lexicographically
  std::vector<PhysRecord> phys;
  std::vector<int> owner;                    // owning part id per voxel
  /// Description embeddings per part id; a voxel's semantic feature is
  /// sem.at(owner[i]). Empty when not attached.
  std::map<int, SemEmbedding> sem;
  bool normalized = false;

  std::size_t size() const { return occupied.size(); }
  bool operator==(const VoxelGrid&) const = default;
};

struct VoxelizeOptions {
  int resolution = 64;
  std::size_t samples = 65536;
  std::uint64_t seed = 0;
};

/// Record every voxel of `part_id` receives.
PhysRecord part_record(const ObjectAsset& asset, int part_id);

/// Surface-sample voxelization of a normalized asset. A voxel is occupied iff
/// a sample lands in it; its record comes from the part owning most of its
/// samples (ties go to the lower part id). UnannotatedPart when a part has no
/// material or a constraint is not finalized.
VoxelGrid voxelize(const ObjectAsset& asset, const VoxelizeOptions& options = {});

/// Per-channel affine maps: scale/1000, (affordance-1)/9, density/10,
/// ids/64, direction and location unchanged, range/pi, type/5.
VoxelGrid normalize_channels(VoxelGrid grid);
VoxelGrid denormalize_channels(VoxelGrid grid);
PhysRecord normalize_record(const PhysRecord& rec);
PhysRecord denormalize_record(const PhysRecord& rec);

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  /// Raw (not necessarily normalized) 768-dim embedding.
  virtual std::vector<double> embed(std::string_view text) = 0;
};

/// Offline stand-in: signed token hashing into 768 bins followed by a fixed
/// random +-1/sqrt(768) projection. Lowercased alphanumeric tokens; empty
/// text embeds the token "<empty>".
class HashingEmbedder : public TextEmbedder {
 public:
  explicit HashingEmbedder(std::uint64_t seed = 0x5eedULL);
  std::vector<double> embed(std::string_view text) override;

 private:
  std::vector<double> projection_;  // row-major 768 x 768
};

/// Client for an external encoder: POST {"input": text} to the URL, expects
/// {"embedding": [768 numbers]}. Any failure is EmbedderUnavailable.
class HttpEmbedder : public TextEmbedder {
 public:
  explicit HttpEmbedder(std::string url, int timeout_sec = 30);
  std::vector<double> embed(std::string_view text) override;

 private:
  std::string url_;
  int timeout_sec_;
};

SemEmbedding embed_descriptions(TextEmbedder& embedder, const DescriptionSet& desc);

/// Fills grid.sem for every part that owns at least one voxel.
void attach_semantics(VoxelGrid& grid, const ObjectAsset& asset, TextEmbedder& embedder);

/// Binary layout, all little-endian (see docs/formats.md):
///   "PKVOXEL1", u32 version=1, u32 resolution, u32 N, u32 flags,
///   u32 channels=14, 14 x char[16] channel names,
///   N x (u16 x, u16 y, u16 z, u16 pad), N x i32 owner, N x 14 f32 records,
///   if flags&2: u32 P, P x (i32 part id, 3 x 768 f32).
/// flags bit 0 = normalized, bit 1 = semantics present.
std::string encode_voxels(const VoxelGrid& grid);
VoxelGrid decode_voxels(std::string_view bytes);
void write_voxels(const VoxelGrid& grid, const std::filesystem::path& file);
VoxelGrid read_voxels(const std::filesystem::path& file);

}  // namespace physkit
