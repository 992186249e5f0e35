#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "physkit/cfm.hpp"
#include "physkit/geometry.hpp"
#include "physkit/kinematics.hpp"
#include "physkit/metrics.hpp"
#include "physkit/physfeat.hpp"
#include "physkit/procgen.hpp"
#include "physkit/vlm.hpp"

namespace physkit {

struct CfmToyConfig {
  std::string model = "mlp";  // "mlp" or "linear"
  int hidden = 32;
  int data_points = 4096;
  MixtureSpec mixture;
  TrainConfig train;
  int sample_steps = 100;
};

/// Every tunable in one place. Sections mirror the JSON keys:
/// "seed", "kinematics", "merge", "procgen", "eval", "voxel", "annotate",
/// "vlm_http", "cfm_toy".
struct RunConfig {
  std::uint64_t seed = 0;
  KinematicsConfig kinematics;
  MergePolicy merge;
  ProcgenConfig procgen;
  EvalOptions eval;
  VoxelizeOptions voxel;
  AnnotateOptions annotate;
  HttpBackendConfig vlm_http;
  CfmToyConfig cfm_toy;
};

/// Copies `seed` into every component seed.
void apply_seed(RunConfig& config, std::uint64_t seed);

nlohmann::json config_to_json(const RunConfig& config);
/// Overlays `doc` on the defaults. Unknown keys and wrong types are
/// SchemaViolation. A top-level "seed" is propagated with apply_seed.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& file);

/// SHA-256 of the canonical JSON dump of a document.
std::string json_hash(const nlohmann::json& doc);

}  // namespace physkit
