#include "physkit/config.hpp"

#include <fmt/format.h>

#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/hash.hpp"

namespace physkit {

using nlohmann::json;

namespace {

json range_json(const MotionRange& r) { return json::array({r.lo, r.hi}); }

// Checks that every key of `patch` exists in `base` with a compatible type,
// then overlays it. Arrays and scalars replace wholesale.
void overlay(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw Error(Errc::SchemaViolation, path + ": expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string p = path + "." + it.key();
    if (!base.contains(it.key())) throw Error(Errc::SchemaViolation, p + ": unknown key");
    json& dst = base[it.key()];
    const json& src = it.value();
    if (dst.is_object()) {
      overlay(dst, src, p);
      continue;
    }
    const bool ok = (dst.is_number() && src.is_number()) || (dst.is_string() && src.is_string()) ||
                    (dst.is_boolean() && src.is_boolean()) || (dst.is_array() && src.is_array());
    if (!ok) throw Error(Errc::SchemaViolation, fmt::format("{}: expected {}", p, dst.type_name()));
    if (dst.is_number_unsigned() && !src.is_number_unsigned()) {
      throw Error(Errc::SchemaViolation, p + ": expected a non-negative integer");
    }
    if (dst.is_number_integer() && !src.is_number_integer()) {
      throw Error(Errc::SchemaViolation, p + ": expected an integer");
    }
    dst = src;
  }
}

json kinematics_json(const KinematicsConfig& k) {
  return json{{"tau", k.tau},
              {"m", k.m},
              {"k_max", k.k_max},
              {"seed", k.seed},
              {"samples_per_part", k.samples_per_part},
              {"weights",
               {{"alignment", k.weights.alignment},
                {"edge_support", k.weights.edge_support},
                {"extent", k.weights.extent}}},
              {"edge_radius", k.edge_radius},
              {"kmeans_restarts", k.kmeans_restarts},
              {"silhouette_cutoff", k.silhouette_cutoff},
              {"pivot_support_slack", k.pivot_support_slack},
              {"default_rotation_range", range_json(k.default_rotation_range)}};
}

KinematicsConfig kinematics_from(const json& j) {
  KinematicsConfig k;
  k.tau = j["tau"];
  k.m = j["m"];
  k.k_max = j["k_max"];
  k.seed = j["seed"];
  k.samples_per_part = j["samples_per_part"];
  k.weights.alignment = j["weights"]["alignment"];
  k.weights.edge_support = j["weights"]["edge_support"];
  k.weights.extent = j["weights"]["extent"];
  k.edge_radius = j["edge_radius"];
  k.kmeans_restarts = j["kmeans_restarts"];
  k.silhouette_cutoff = j["silhouette_cutoff"];
  k.pivot_support_slack = j["pivot_support_slack"];
  const json& r = j["default_rotation_range"];
  if (r.size() != 2) throw Error(Errc::SchemaViolation, "kinematics.default_rotation_range: expected [lo, hi]");
  k.default_rotation_range = {r[0].get<double>(), r[1].get<double>()};
  return k;
}

}  // namespace

void apply_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.kinematics.seed = seed;
  c.procgen.kinematics.seed = seed;
  c.eval.seed = seed;
  c.voxel.seed = seed;
  c.cfm_toy.train.seed = seed;
}

json config_to_json(const RunConfig& c) {
  const auto& p = c.procgen;
  const auto& t = c.cfm_toy;
  return json{
      {"seed", c.seed},
      {"kinematics", kinematics_json(c.kinematics)},
      {"merge",
       {{"area_threshold_hard", c.merge.area_threshold_hard},
        {"area_threshold_soft", c.merge.area_threshold_soft},
        {"face_threshold", c.merge.face_threshold}}},
      {"procgen",
       {{"normal_tolerance_deg", p.normal_tolerance_deg},
        {"min_region_area", p.min_region_area},
        {"coplanar_angle_deg", p.coplanar_angle_deg},
        {"coplanar_offset", p.coplanar_offset},
        {"scale_min", p.scale_min},
        {"scale_max", p.scale_max},
        {"max_protrusion", p.max_protrusion},
        {"designated_base_part", p.designated_base_part},
        {"donor_categories", p.donor_categories},
        {"categories", p.categories},
        {"kinematics", kinematics_json(p.kinematics)}}},
      {"eval",
       {{"surface_samples", c.eval.surface_samples},
        {"fscore_threshold", c.eval.fscore_threshold},
        {"psnr_views", c.eval.psnr_views},
        {"psnr_resolution", c.eval.psnr_resolution},
        {"property_resolution", c.eval.property_resolution},
        {"seed", c.eval.seed}}},
      {"voxel", {{"resolution", c.voxel.resolution}, {"samples", c.voxel.samples}, {"seed", c.voxel.seed}}},
      {"annotate",
       {{"model", c.annotate.model},
        {"max_images_per_request", c.annotate.max_images_per_request},
        {"retry_attempts", c.annotate.retry.attempts},
        {"retry_initial_backoff_ms", c.annotate.retry.initial_backoff.count()},
        {"retry_multiplier", c.annotate.retry.multiplier}}},
      {"vlm_http",
       {{"endpoint", c.vlm_http.endpoint},
        {"api_key_env", c.vlm_http.api_key_env},
        {"timeout_ms", c.vlm_http.timeout.count()}}},
      {"cfm_toy",
       {{"model", t.model},
        {"hidden", t.hidden},
        {"data_points", t.data_points},
        {"mixture", {{"dim", t.mixture.dim}, {"centers", t.mixture.centers}, {"sigma", t.mixture.sigma}}},
        {"lr", t.train.lr},
        {"momentum", t.train.momentum},
        {"steps", t.train.steps},
        {"batch", t.train.batch},
        {"seed", t.train.seed},
        {"smoothing", t.train.smoothing},
        {"sample_steps", t.sample_steps}}},
  };
}

RunConfig config_from_json(const json& doc) {
  json full = config_to_json(RunConfig{});
  overlay(full, doc, "config");
  RunConfig c;
  try {
    c.seed = full["seed"];
    c.kinematics = kinematics_from(full["kinematics"]);
    const json& m = full["merge"];
    c.merge.area_threshold_hard = m["area_threshold_hard"];
    c.merge.area_threshold_soft = m["area_threshold_soft"];
    c.merge.face_threshold = m["face_threshold"];
    const json& p = full["procgen"];
    c.procgen.normal_tolerance_deg = p["normal_tolerance_deg"];
    c.procgen.min_region_area = p["min_region_area"];
    c.procgen.coplanar_angle_deg = p["coplanar_angle_deg"];
    c.procgen.coplanar_offset = p["coplanar_offset"];
    c.procgen.scale_min = p["scale_min"];
    c.procgen.scale_max = p["scale_max"];
    c.procgen.max_protrusion = p["max_protrusion"];
    c.procgen.designated_base_part = p["designated_base_part"];
    c.procgen.donor_categories = p["donor_categories"].get<std::vector<std::string>>();
    c.procgen.categories = p["categories"].get<std::vector<std::string>>();
    c.procgen.kinematics = kinematics_from(p["kinematics"]);
    const json& e = full["eval"];
    c.eval.surface_samples = e["surface_samples"];
    c.eval.fscore_threshold = e["fscore_threshold"];
    c.eval.psnr_views = e["psnr_views"];
    c.eval.psnr_resolution = e["psnr_resolution"];
    c.eval.property_resolution = e["property_resolution"];
    c.eval.seed = e["seed"];
    const json& v = full["voxel"];
    c.voxel.resolution = v["resolution"];
    c.voxel.samples = v["samples"];
    c.voxel.seed = v["seed"];
    const json& a = full["annotate"];
    c.annotate.model = a["model"];
    c.annotate.max_images_per_request = a["max_images_per_request"];
    c.annotate.retry.attempts = a["retry_attempts"];
    c.annotate.retry.initial_backoff = std::chrono::milliseconds(a["retry_initial_backoff_ms"].get<long long>());
    c.annotate.retry.multiplier = a["retry_multiplier"];
    const json& h = full["vlm_http"];
    c.vlm_http.endpoint = h["endpoint"];
    c.vlm_http.api_key_env = h["api_key_env"];
    c.vlm_http.timeout = std::chrono::milliseconds(h["timeout_ms"].get<long long>());
    const json& t = full["cfm_toy"];
    c.cfm_toy.model = t["model"];
    c.cfm_toy.hidden = t["hidden"];
    c.cfm_toy.data_points = t["data_points"];
    c.cfm_toy.mixture.dim = t["mixture"]["dim"];
    c.cfm_toy.mixture.centers = t["mixture"]["centers"].get<std::vector<std::vector<double>>>();
    c.cfm_toy.mixture.sigma = t["mixture"]["sigma"];
    c.cfm_toy.train.lr = t["lr"];
    c.cfm_toy.train.momentum = t["momentum"];
    c.cfm_toy.train.steps = t["steps"];
    c.cfm_toy.train.batch = t["batch"];
    c.cfm_toy.train.seed = t["seed"];
    c.cfm_toy.train.smoothing = t["smoothing"];
    c.cfm_toy.sample_steps = t["sample_steps"];
  } catch (const json::exception& ex) {
    throw Error(Errc::SchemaViolation, std::string("config: ") + ex.what());
  }
  if (c.cfm_toy.model != "mlp" && c.cfm_toy.model != "linear") {
    throw Error(Errc::SchemaViolation, "config.cfm_toy.model: expected \"mlp\" or \"linear\"");
  }
  if (doc.contains("seed")) apply_seed(c, c.seed);
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw Error(Errc::MissingFile, file.string());
  json doc;
  try {
    doc = json::parse(read_text_file(file));
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaViolation, fmt::format("{}: {}", file.string(), e.what()));
  }
  return config_from_json(doc);
}

std::string json_hash(const json& doc) { return sha256_hex(canonical_dump(doc)); }

}  // namespace physkit
