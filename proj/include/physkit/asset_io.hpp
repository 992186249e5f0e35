#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "physkit/asset.hpp"
#include "physkit/validate.hpp"

namespace physkit {

using json = nlohmann::json;

inline constexpr int kAssetFormatVersion = 1;

struct LoadOptions {
  ValidationOptions validation;
};

/// Reads `asset.json` plus one `part_<id>.obj` per part. Faces with area below
/// 1e-12 are dropped with a warning; coordinates are left untouched.
ObjectAsset load_asset(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Refuses assets that fail validation (ValidationError). The directory is
/// created when missing.
void save_asset(const ObjectAsset& asset, const std::filesystem::path& dir,
                const ValidationOptions& options = {});

/// Annotation document (everything but the meshes), canonical key order.
json asset_to_json(const ObjectAsset& asset);
/// Fills everything but meshes; parts get empty meshes. Throws SchemaViolation.
ObjectAsset asset_from_json(const json& doc);

json constraint_to_json(const KinematicConstraint& c);
KinematicConstraint constraint_from_json(const json& doc, const std::string& path = "constraint");

std::string canonical_dump(const json& doc);

TriangleMesh read_obj(const std::filesystem::path& file);
TriangleMesh parse_obj(const std::string& text, const std::string& source_name = "<memory>");
std::string format_obj(const TriangleMesh& mesh);
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& file);

/// Removes faces whose area is below `min_area`; returns how many were dropped.
std::size_t drop_degenerate_faces(TriangleMesh& mesh, double min_area = 1e-12);

std::string read_text_file(const std::filesystem::path& file);
void write_text_file(const std::filesystem::path& file, const std::string& text);

}  // namespace physkit
