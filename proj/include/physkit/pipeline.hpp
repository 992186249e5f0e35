#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "physkit/annotate.hpp"
#include "physkit/config.hpp"
#include "physkit/geometry.hpp"
#include "physkit/review.hpp"
#include "physkit/vlm.hpp"

namespace physkit {

// Files kept next to asset.json in an asset directory.
inline constexpr const char* kReviewLogFile = "review_log.jsonl";
inline constexpr const char* kStubsFile = "stubs.json";
inline constexpr const char* kRawAnnotationFile = "raw_annotation.json";
inline constexpr const char* kPromptDir = "prompt";

/// [{"kind", "parent_part", "child_part"}], in order.
nlohmann::json stubs_to_json(const std::vector<KinematicConstraint>& stubs);
std::vector<KinematicConstraint> stubs_from_json(const nlohmann::json& doc);
std::vector<KinematicConstraint> load_stubs(const std::filesystem::path& asset_dir);
void save_stubs(const std::vector<KinematicConstraint>& stubs, const std::filesystem::path& asset_dir);

/// SHA-256 over the canonical annotation JSON and every part's OBJ text.
std::string asset_hash(const ObjectAsset& asset);

/// Replaces the constraint whose child matches, or appends.
void upsert_constraint(ObjectAsset& asset, const KinematicConstraint& c);

/// Estimates every stub, picks the top candidate and finalizes it.
ObjectAsset estimate_stubs(const ObjectAsset& asset, const std::vector<KinematicConstraint>& stubs,
                           const KinematicsConfig& config);

/// Applies the stored raw annotation to the asset in `dir` using the current
/// review status, then writes asset.json and stubs.json.
AppliedAnnotation apply_stored_annotation(const std::filesystem::path& dir, ReviewStatus status);

struct PipelineOptions {
  RunConfig config;
  /// Records a human_approved transition right after the VLM step.
  bool auto_approve = false;
  /// Runs estimate_stubs after applying (requires auto_approve).
  bool auto_estimate = false;
  std::string editor = "cli";
};

struct PipelineResult {
  MergeResult merge;  // merge.asset is the normalized, merged geometry
  Prompt prompt;
  RawAnnotation raw;
  ObjectAsset asset;  // annotated (and estimated) when approved, else merge.asset
  std::vector<KinematicConstraint> stubs;
  ReviewStatus status = ReviewStatus::Pending;
};

/// normalize -> merge -> prompt -> VLM -> parse, logging vlm_done; then, if
/// approved, apply and optionally estimate. The log must be in pending.
PipelineResult run_annotation(const ObjectAsset& input, VlmBackend& backend, ReviewLog& log,
                              const PipelineOptions& options);

/// Writes asset.json + meshes, raw_annotation.json, stubs.json and
/// prompt/part_<id>.png into `dir` (the review log is written by the log).
void write_annotation_outputs(const PipelineResult& result, const std::filesystem::path& dir);

}  // namespace physkit
