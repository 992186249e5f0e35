#include "physkit/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/hash.hpp"
#include "physkit/image_io.hpp"
#include "physkit/kinematics.hpp"

namespace physkit {

namespace fs = std::filesystem;
using nlohmann::json;

json stubs_to_json(const std::vector<KinematicConstraint>& stubs) {
  json out = json::array();
  for (const auto& s : stubs) {
    out.push_back(json{{"kind", std::string(to_string(s.kind))},
                       {"parent_part", s.parent_part ? json(*s.parent_part) : json(nullptr)},
                       {"child_part", s.child_part ? json(*s.child_part) : json(nullptr)}});
  }
  return out;
}

std::vector<KinematicConstraint> stubs_from_json(const json& doc) {
  if (!doc.is_array()) throw Error(Errc::SchemaViolation, "stubs: expected an array");
  std::vector<KinematicConstraint> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& j = doc[i];
    const std::string path = fmt::format("stubs[{}]", i);
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
      throw Error(Errc::SchemaViolation, path + ".kind: expected a string");
    }
    const auto kind = parse_kind(j["kind"].get<std::string>());
    if (!kind || !has_parent_child(*kind)) throw Error(Errc::SchemaViolation, path + ".kind: expected B, C, D or CB");
    for (const char* key : {"parent_part", "child_part"}) {
      if (!j.contains(key) || !j[key].is_number_integer()) {
        throw Error(Errc::SchemaViolation, fmt::format("{}.{}: expected an integer", path, key));
      }
    }
    KinematicConstraint c;
    c.kind = *kind;
    c.parent_part = j["parent_part"].get<int>();
    c.child_part = j["child_part"].get<int>();
    out.push_back(c);
  }
  return out;
}

std::vector<KinematicConstraint> load_stubs(const fs::path& asset_dir) {
  const fs::path file = asset_dir / kStubsFile;
  if (!fs::exists(file)) return {};
  const json doc = json::parse(read_text_file(file), nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::SchemaViolation, file.string() + ": not JSON");
  return stubs_from_json(doc);
}

void save_stubs(const std::vector<KinematicConstraint>& stubs, const fs::path& asset_dir) {
  write_text_file(asset_dir / kStubsFile, canonical_dump(stubs_to_json(stubs)));
}

std::string asset_hash(const ObjectAsset& asset) {
  std::string buf = canonical_dump(asset_to_json(asset));
  for (const Part& p : asset.parts) {
    buf += fmt::format("--part {}\n", p.id);
    buf += format_obj(p.mesh);
  }
  return sha256_hex(buf);
}

void upsert_constraint(ObjectAsset& asset, const KinematicConstraint& c) {
  for (auto& existing : asset.constraints) {
    if (existing.child_part && c.child_part && *existing.child_part == *c.child_part) {
      existing = c;
      return;
    }
  }
  asset.constraints.push_back(c);
}

ObjectAsset estimate_stubs(const ObjectAsset& asset, const std::vector<KinematicConstraint>& stubs,
                           const KinematicsConfig& config) {
  ObjectAsset out = asset;
  for (const auto& stub : stubs) {
    KinematicConstraint c = estimate_constraint(out, *stub.child_part, *stub.parent_part, stub.kind, config);
    c.finalized = true;
    spdlog::info("estimated {} joint child {} parent {}", to_string(c.kind), *c.child_part, *c.parent_part);
    upsert_constraint(out, c);
  }
  return out;
}

AppliedAnnotation apply_stored_annotation(const fs::path& dir, ReviewStatus status) {
  const fs::path raw_file = dir / kRawAnnotationFile;
  if (!fs::exists(raw_file)) throw Error(Errc::MissingFile, raw_file.string());
  const json doc = json::parse(read_text_file(raw_file), nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::SchemaViolation, raw_file.string() + ": not JSON");
  const RawAnnotation raw = raw_from_json(doc, true);
  const ObjectAsset asset = load_asset(dir);
  AppliedAnnotation applied = apply_annotation(asset, raw, status);
  save_asset(applied.asset, dir);
  save_stubs(applied.stubs, dir);
  return applied;
}

PipelineResult run_annotation(const ObjectAsset& input, VlmBackend& backend, ReviewLog& log,
                              const PipelineOptions& options) {
  if (log.state().status != ReviewStatus::Pending) {
    throw Error(Errc::InvalidTransition,
                fmt::format("annotation needs a pending asset, log is {}", to_string(log.state().status)));
  }
  const RunConfig& cfg = options.config;
  PipelineResult r;
  r.merge = merge_tiny_parts(normalize_object(input), cfg.merge, cfg.seed);
  r.prompt = build_prompt(r.merge.asset);
  r.raw = annotate_with_vlm(backend, r.prompt, cfg.annotate);
  log.transition(ReviewStatus::VlmDone, "vlm:" + cfg.annotate.model, raw_to_json(r.raw));
  r.status = ReviewStatus::VlmDone;
  r.asset = r.merge.asset;
  if (!options.auto_approve) return r;

  log.transition(ReviewStatus::HumanApproved, options.editor);
  r.status = ReviewStatus::HumanApproved;
  AppliedAnnotation applied = apply_annotation(r.merge.asset, r.raw, r.status);
  r.asset = std::move(applied.asset);
  r.stubs = std::move(applied.stubs);
  if (options.auto_estimate) {
    r.asset = estimate_stubs(r.asset, r.stubs, cfg.kinematics);
    for (const auto& c : r.asset.constraints) log.record_selection(options.editor, constraint_to_json(c));
    r.stubs.clear();
  }
  return r;
}

void write_annotation_outputs(const PipelineResult& result, const fs::path& dir) {
  ValidationOptions vo;
  save_asset(result.asset, dir, vo);
  write_text_file(dir / kRawAnnotationFile, canonical_dump(raw_to_json(result.raw)));
  save_stubs(result.stubs, dir);
  fs::create_directories(dir / kPromptDir);
  for (const PartImage& img : result.prompt.images) {
    write_png(img.image, dir / kPromptDir / fmt::format("part_{}.png", img.part_id));
  }
}

}  // namespace physkit
