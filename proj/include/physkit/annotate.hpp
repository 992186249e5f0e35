#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "physkit/asset.hpp"
#include "physkit/render.hpp"
#include "physkit/review.hpp"

namespace physkit {

/// The annotation system prompt exactly as published, with its two worked
/// part blocks (Part_1, Part_2).
std::string_view prompt_template();

/// Template with the part blocks regenerated for `part_labels`; block k reads
/// "Part_<label> (image_<k>)". Everything else is left untouched.
std::string build_system_text(const std::vector<int>& part_labels);

struct PartImage {
  int part_id = 0;
  int view_index = 0;        // into default_property_views()
  std::size_t red_pixels = 0;
  RgbImage image;
};

struct Prompt {
  std::string system_text;
  std::vector<PartImage> images;  // one per part, in part order
  /// Parts with no red pixel in any default view (the first view is used).
  std::vector<int> occlusion_warnings;
};

struct PromptOptions {
  int resolution = 512;
};

Prompt build_prompt(const ObjectAsset& asset, const PromptOptions& options = {});

struct MovementGroup {
  int label_a = 0;
  int label_b = 0;
  KinematicKind movement_type = KinematicKind::E;
  std::optional<int> parent_label;
  std::optional<int> child_label;

  bool operator==(const MovementGroup&) const = default;
};

struct RawPart {
  int label = 0;
  std::string name;
  std::string material;
  double density = 0.0;  // g/cm^3
  int priority_rank = 1;
  std::vector<MovementGroup> neighbors;
  DescriptionSet descriptions;  // kinematic <- Movement_description

  bool operator==(const RawPart&) const = default;
};

struct RawAnnotation {
  std::string object_name;
  std::string category;
  std::string dimension;  // "L*W*H" in cm, as given
  AbsoluteScale scale;    // parsed from dimension
  std::vector<RawPart> parts;

  bool operator==(const RawAnnotation&) const = default;
};

/// "1.2 g/cm^3", "1.2 g/cm3", "1.2 g/cm³", "1.2" or a JSON number.
std::optional<double> parse_density(const nlohmann::json& value);
/// "80*10*25" (optional spaces, optional trailing "cm").
std::optional<AbsoluteScale> parse_dimension(std::string_view text);

/// Extracts JSON from model text (fenced or bare, strict then lenient) and
/// validates it. UnparseableResponse when no JSON can be recovered,
/// SchemaViolation listing every offending path otherwise. CB is rejected.
RawAnnotation parse_response(std::string_view text);

/// Validates an already parsed document. `allow_cb` is set for human edits.
RawAnnotation raw_from_json(const nlohmann::json& doc, bool allow_cb = false);
/// Round-trips through raw_from_json; field names follow the prompt's example.
nlohmann::json raw_to_json(const RawAnnotation& raw);

/// The annotation an ideal reviewer would produce for an already annotated
/// asset: every constraint with a parent and child becomes a movement group
/// listed on both of its parts. Used to script offline VLM responses. The
/// VLM vocabulary has no CB, so CB is reported as C unless `keep_cb`.
RawAnnotation raw_from_asset(const ObjectAsset& asset, bool keep_cb = false);

struct MaterialProperties {
  double youngs_modulus_gpa = 1.0;
  double poisson_ratio = 0.3;
  bool known = false;
};
/// Case-insensitive lookup; unknown names get E = 1 GPa, nu = 0.3.
MaterialProperties lookup_material(std::string_view name);

struct AppliedAnnotation {
  ObjectAsset asset;
  /// Unfinalized (kind, parent, child) stubs for B/C/D/CB groups, deduplicated,
  /// in order of first appearance. Not inserted into `asset`.
  std::vector<KinematicConstraint> stubs;
};

/// Requires `status` human_approved or human_edited (InvalidTransition
/// otherwise) and label set == part id set (LabelMismatch).
AppliedAnnotation apply_annotation(const ObjectAsset& asset, const RawAnnotation& raw, ReviewStatus status);

}  // namespace physkit
