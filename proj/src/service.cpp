#include "physkit/service.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <regex>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "physkit/annotate.hpp"
#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/kinematics.hpp"
#include "physkit/pipeline.hpp"
#include "physkit/validate.hpp"

namespace physkit {

static_assert(std::endian::native == std::endian::little, "mesh codec assumes a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ServiceResponse json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

ServiceResponse error_response(int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  return json_response(status, extra);
}

int status_for(Errc code) {
  switch (code) {
    case Errc::MissingFile:
    case Errc::UnknownPart: return 404;
    case Errc::InvalidTransition: return 409;
    case Errc::SchemaViolation:
    case Errc::ValidationError:
    case Errc::LabelMismatch:
    case Errc::InvalidArgument:
    case Errc::NoContact:
    case Errc::DegenerateInput: return 422;
    default: return 500;
  }
}

bool valid_id(const std::string& id) {
  static const std::regex kId(R"([A-Za-z0-9_.-]+)");
  return std::regex_match(id, kId) && id != "." && id != "..";
}

json parse_body(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::SchemaViolation, "request body must be a JSON object");
  return doc;
}

std::uint64_t body_version(const json& doc) {
  if (!doc.contains("version") || !doc["version"].is_number_unsigned()) {
    throw Error(Errc::SchemaViolation, "version: expected a non-negative integer");
  }
  return doc["version"].get<std::uint64_t>();
}

std::string body_editor(const json& doc) {
  if (!doc.contains("editor")) return "reviewer";
  if (!doc["editor"].is_string() || doc["editor"].get<std::string>().empty()) {
    throw Error(Errc::SchemaViolation, "editor: expected a non-empty string");
  }
  return doc["editor"].get<std::string>();
}

json violations_json(const std::vector<Violation>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back(json{{"code", std::string(to_string(v.code))}, {"path", v.path}, {"message", v.message}});
  return out;
}

}  // namespace

std::string encode_mesh(const TriangleMesh& mesh) {
  std::string out;
  auto put_u32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  auto put_f32 = [&](float v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  put_u32(static_cast<std::uint32_t>(mesh.vertices.size()));
  put_u32(static_cast<std::uint32_t>(mesh.faces.size()));
  for (const Vec3& v : mesh.vertices) {
    for (int k = 0; k < 3; ++k) put_f32(static_cast<float>(v[k]));
  }
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) put_u32(static_cast<std::uint32_t>(f[k]));
  }
  return out;
}

TriangleMesh decode_mesh(std::string_view bytes) {
  auto u32 = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  if (bytes.size() < 8) throw Error(Errc::SchemaViolation, "mesh payload truncated");
  const std::size_t nv = u32(0), nf = u32(4);
  if (bytes.size() != 8 + 12 * nv + 12 * nf) throw Error(Errc::SchemaViolation, "mesh payload size mismatch");
  TriangleMesh m;
  for (std::size_t i = 0; i < nv; ++i) {
    float xyz[3];
    std::memcpy(xyz, bytes.data() + 8 + 12 * i, 12);
    m.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
  }
  const std::size_t base = 8 + 12 * nv;
  for (std::size_t i = 0; i < nf; ++i) {
    m.faces.push_back({static_cast<int>(u32(base + 12 * i)), static_cast<int>(u32(base + 12 * i + 4)),
                       static_cast<int>(u32(base + 12 * i + 8))});
  }
  return m;
}

ReviewService::ReviewService(ServiceOptions options)
    : options_(std::move(options)), kinematics_hash_(json_hash(config_to_json(options_.config)["kinematics"])) {}

ReviewService::~ReviewService() { stop(); }

fs::path ReviewService::asset_dir(const std::string& id) const { return options_.root / id; }

std::shared_mutex& ReviewService::asset_mutex(const std::string& id) {
  std::lock_guard lock(registry_mutex_);
  auto& slot = asset_mutexes_[id];
  if (!slot) slot = std::make_unique<std::shared_mutex>();
  return *slot;
}

ServiceResponse ReviewService::dispatch(const std::string& method, const std::string& path, const std::string& body,
                                        const std::string& query_kind) {
  static const std::regex kAsset(R"(^/assets/([^/]+)$)");
  static const std::regex kSub(R"(^/assets/([^/]+)/(review|annotation|stubs|selection)$)");
  static const std::regex kPart(R"(^/assets/([^/]+)/(mesh|isolation)/(-?\d+)$)");
  static const std::regex kCand(R"(^/assets/([^/]+)/candidates/(-?\d+)/(-?\d+)$)");
  try {
    std::smatch m;
    if (path == "/assets") {
      if (method != "GET") return error_response(405, "method not allowed");
      return list_assets();
    }
    std::string id;
    if (std::regex_match(path, m, kAsset) || std::regex_match(path, m, kSub) || std::regex_match(path, m, kPart) ||
        std::regex_match(path, m, kCand)) {
      id = m[1];
      if (!valid_id(id) || !fs::exists(asset_dir(id) / "asset.json")) {
        return error_response(404, "unknown asset '" + id + "'");
      }
    } else {
      return error_response(404, "no route for " + path);
    }
    if (std::regex_match(path, m, kAsset)) {
      if (method != "GET") return error_response(405, "method not allowed");
      return get_asset(id);
    }
    if (std::regex_match(path, m, kSub)) {
      const std::string what = m[2];
      if (what == "selection") {
        if (method != "POST") return error_response(405, "method not allowed");
        return post_selection(id, body);
      }
      if (what == "review") {
        if (method == "POST") return post_review(id, body);
        if (method == "GET") return get_review(id);
        return error_response(405, "method not allowed");
      }
      if (method != "GET") return error_response(405, "method not allowed");
      return get_file(id, what == "annotation" ? kRawAnnotationFile : kStubsFile);
    }
    if (std::regex_match(path, m, kPart)) {
      if (method != "GET") return error_response(405, "method not allowed");
      const int part = std::stoi(m[3]);
      return m[2] == "mesh" ? get_mesh(id, part) : get_isolation(id, part);
    }
    std::regex_match(path, m, kCand);
    if (method != "GET") return error_response(405, "method not allowed");
    return get_candidates(id, std::stoi(m[2]), std::stoi(m[3]), query_kind);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), e.what());
  } catch (const std::exception& e) {
    spdlog::error("service: {} {}: {}", method, path, e.what());
    return error_response(500, e.what());
  }
}

ServiceResponse ReviewService::list_assets() {
  std::vector<std::string> ids;
  if (fs::is_directory(options_.root)) {
    for (const auto& e : fs::directory_iterator(options_.root)) {
      if (e.is_directory() && fs::exists(e.path() / "asset.json") && valid_id(e.path().filename().string())) {
        ids.push_back(e.path().filename().string());
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  json out = json::array();
  for (const auto& id : ids) {
    std::shared_lock lock(asset_mutex(id));
    const ObjectAsset a = asset_from_json(json::parse(read_text_file(asset_dir(id) / "asset.json")));
    const ReviewState st = replay(ReviewLog::read_events(asset_dir(id) / kReviewLogFile));
    out.push_back(json{{"id", id},
                       {"object_name", a.object_name},
                       {"category", a.category},
                       {"parts", a.parts.size()},
                       {"constraints", a.constraints.size()},
                       {"status", std::string(to_string(st.status))},
                       {"version", st.version}});
  }
  return json_response(200, out);
}

ServiceResponse ReviewService::get_asset(const std::string& id) {
  std::shared_lock lock(asset_mutex(id));
  const ObjectAsset a = asset_from_json(json::parse(read_text_file(asset_dir(id) / "asset.json")));
  return {200, "application/json", canonical_dump(asset_to_json(a))};
}

ServiceResponse ReviewService::get_review(const std::string& id) {
  std::shared_lock lock(asset_mutex(id));
  const auto events = ReviewLog::read_events(asset_dir(id) / kReviewLogFile);
  const ReviewState st = replay(events);
  json ev = json::array();
  for (const auto& e : events) ev.push_back(event_to_json(e));
  return json_response(200, json{{"status", std::string(to_string(st.status))},
                                 {"editor", st.editor},
                                 {"timestamp", st.timestamp},
                                 {"version", st.version},
                                 {"events", ev}});
}

ServiceResponse ReviewService::get_file(const std::string& id, const char* name) {
  std::shared_lock lock(asset_mutex(id));
  const fs::path file = asset_dir(id) / name;
  if (!fs::exists(file)) return error_response(404, std::string(name) + " not present for asset '" + id + "'");
  return {200, "application/json", read_text_file(file)};
}

ServiceResponse ReviewService::get_mesh(const std::string& id, int part) {
  std::shared_lock lock(asset_mutex(id));
  const ObjectAsset a = load_asset(asset_dir(id));
  const Part* p = a.find_part(part);
  if (!p) return error_response(404, fmt::format("asset '{}' has no part {}", id, part));
  return {200, "application/octet-stream", encode_mesh(p->mesh)};
}

ServiceResponse ReviewService::get_isolation(const std::string& id, int part) {
  std::shared_lock lock(asset_mutex(id));
  const fs::path file = asset_dir(id) / kPromptDir / fmt::format("part_{}.png", part);
  if (!fs::exists(file)) return error_response(404, fmt::format("no isolation image for part {} of '{}'", part, id));
  return {200, "image/png", read_text_file(file)};
}

ServiceResponse ReviewService::get_candidates(const std::string& id, int child, int parent, const std::string& kind_text) {
  std::shared_lock lock(asset_mutex(id));
  const fs::path dir = asset_dir(id);
  const ObjectAsset a = load_asset(dir);
  for (int pid : {child, parent}) {
    if (!a.find_part(pid)) return error_response(404, fmt::format("asset '{}' has no part {}", id, pid));
  }
  KinematicKind kind = KinematicKind::C;
  if (!kind_text.empty()) {
    const auto k = parse_kind(kind_text);
    if (!k || !has_parent_child(*k)) return error_response(422, "kind must be one of B, C, D, CB");
    kind = *k;
  } else {
    for (const auto& s : load_stubs(dir)) {
      if (*s.child_part == child && *s.parent_part == parent) kind = s.kind;
    }
  }
  const std::string hash = asset_hash(a);
  const std::string key = fmt::format("{}|{}|{}|{}|{}", hash, child, parent, to_string(kind), kinematics_hash_);
  {
    std::lock_guard cl(cache_mutex_);
    if (auto it = candidate_cache_.find(key); it != candidate_cache_.end()) return {200, "application/json", it->second};
  }
  const EstimateDetail detail = estimate_detailed(a, child, parent, kind, options_.config.kinematics);
  json cands = json::array();
  for (const auto& c : detail.candidates) cands.push_back(candidate_to_json(c));
  const std::string body = json{{"asset_hash", hash},
                                {"child", child},
                                {"parent", parent},
                                {"kind", std::string(to_string(kind))},
                                {"config_hash", kinematics_hash_},
                                {"candidates", cands}}
                               .dump();
  std::lock_guard cl(cache_mutex_);
  candidate_cache_.emplace(key, body);
  return {200, "application/json", body};
}

ServiceResponse ReviewService::post_selection(const std::string& id, const std::string& body) {
  const json doc = parse_body(body);
  std::unique_lock lock(asset_mutex(id));
  const fs::path dir = asset_dir(id);
  ReviewLog log(dir / kReviewLogFile, options_.clock);
  const std::uint64_t version = body_version(doc);
  if (version != log.state().version) {
    return error_response(409, "stale version", json{{"version", log.state().version}});
  }
  const std::string editor = body_editor(doc);
  ObjectAsset a = load_asset(dir);

  KinematicConstraint c;
  if (doc.contains("constraint")) {
    c = constraint_from_json(doc["constraint"], "constraint");
  } else {
    for (const char* key : {"child", "parent"}) {
      if (!doc.contains(key) || !doc[key].is_number_integer()) {
        return error_response(422, fmt::format("{}: expected an integer", key));
      }
    }
    if (!doc.contains("kind") || !doc["kind"].is_string()) return error_response(422, "kind: expected a string");
    const auto kind = parse_kind(doc["kind"].get<std::string>());
    if (!kind || !has_parent_child(*kind)) return error_response(422, "kind must be one of B, C, D, CB");
    if (!doc.contains("candidate")) return error_response(422, "candidate or constraint required");
    const AxisCandidate cand = candidate_from_json(doc["candidate"]);
    const int child = doc["child"], parent = doc["parent"];
    if (!a.find_part(child) || !a.find_part(parent)) return error_response(404, "unknown part in selection");
    // A candidate is sent back as served, so its direction must already be unit length.
    if (std::abs(cand.direction.norm() - 1.0) > 1e-6) {
      return error_response(422, "invalid selection",
                            json{{"errors", json::array({json{{"code", "DirectionNotUnit"},
                                                              {"path", "candidate.direction"},
                                                              {"message", "direction must have unit length"}}})}});
    }
    c = constraint_from_candidate(a, child, parent, *kind, cand, options_.config.kinematics);
  }
  c.finalized = true;
  auto violations = validate_constraint(c, "constraint");
  for (const auto* ref : {&c.child_part, &c.parent_part}) {
    if (*ref && !a.find_part(**ref)) {
      violations.push_back({ViolationCode::DanglingConstraintRef, "constraint", fmt::format("unknown part {}", **ref)});
    }
  }
  if (!violations.empty()) return error_response(422, "invalid selection", json{{"errors", violations_json(violations)}});

  upsert_constraint(a, c);
  save_asset(a, dir);
  auto stubs = load_stubs(dir);
  std::erase_if(stubs, [&](const KinematicConstraint& s) { return s.child_part == c.child_part; });
  if (fs::exists(dir / kStubsFile)) save_stubs(stubs, dir);
  const ReviewEvent& e = log.record_selection(editor, constraint_to_json(c));
  return json_response(200, json{{"version", e.seq}, {"constraint", constraint_to_json(c)}});
}

ServiceResponse ReviewService::post_review(const std::string& id, const std::string& body) {
  const json doc = parse_body(body);
  std::unique_lock lock(asset_mutex(id));
  const fs::path dir = asset_dir(id);
  ReviewLog log(dir / kReviewLogFile, options_.clock);
  const std::uint64_t version = body_version(doc);
  if (version != log.state().version) {
    return error_response(409, "stale version", json{{"version", log.state().version}});
  }
  const std::string editor = body_editor(doc);
  if (!doc.contains("action") || !doc["action"].is_string()) return error_response(422, "action: expected a string");
  const std::string action = doc["action"];
  const ReviewStatus from = log.state().status;

  if (action == "reject") {
    if (!transition_allowed(from, ReviewStatus::Rejected)) {
      return error_response(409, fmt::format("cannot reject from {}", to_string(from)));
    }
    log.transition(ReviewStatus::Rejected, editor);
    const ReviewEvent& e = log.transition(ReviewStatus::Pending, "system");
    return json_response(200, json{{"status", "pending"}, {"version", e.seq}});
  }
  if (action != "approve" && action != "edit") return error_response(422, "action must be approve, edit or reject");
  const ReviewStatus to = action == "approve" ? ReviewStatus::HumanApproved : ReviewStatus::HumanEdited;
  if (!transition_allowed(from, to)) {
    return error_response(409, fmt::format("cannot {} from {}", action, to_string(from)));
  }
  json payload = nullptr;
  if (to == ReviewStatus::HumanEdited) {
    if (!doc.contains("annotation")) return error_response(422, "annotation required for edit");
    const RawAnnotation edited = raw_from_json(doc["annotation"], true);
    payload = raw_to_json(edited);
  }
  // Apply before logging so a failing annotation leaves the state untouched.
  const fs::path raw_file = dir / kRawAnnotationFile;
  RawAnnotation raw;
  if (!payload.is_null()) {
    raw = raw_from_json(payload, true);
  } else {
    if (!fs::exists(raw_file)) return error_response(404, "no annotation to approve");
    raw = raw_from_json(json::parse(read_text_file(raw_file)), true);
  }
  const AppliedAnnotation applied = apply_annotation(load_asset(dir), raw, to);
  if (!payload.is_null()) write_text_file(raw_file, canonical_dump(payload));
  save_asset(applied.asset, dir);
  save_stubs(applied.stubs, dir);
  const ReviewEvent& e = log.transition(to, editor, payload);
  return json_response(200, json{{"status", std::string(to_string(to))}, {"version", e.seq}});
}

void ReviewService::mount(httplib::Server& server) {
  auto handle = [this](const httplib::Request& req, httplib::Response& res) {
    const ServiceResponse r = dispatch(req.method, req.path, req.body, req.get_param_value("kind"));
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  // Everything goes through dispatch so unknown routes also get a JSON error.
  const std::string pattern = R"(/.*)";
  server.Get(pattern, handle);
  server.Post(pattern, handle);
  server.Options(pattern, [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
}

bool ReviewService::listen(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  return server_->listen(host, port);
}

int ReviewService::bind_any_port(const std::string& host) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  const int port = server_->bind_to_any_port(host);
  return port < 0 ? 0 : port;
}

void ReviewService::serve() {
  if (server_) server_->listen_after_bind();
}

void ReviewService::stop() {
  if (server_) server_->stop();
}

void ReviewService::wait_until_ready() {
  if (server_) server_->wait_until_ready();
}

}  // namespace physkit
