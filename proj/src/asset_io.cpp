#include "physkit/asset_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "physkit/error.hpp"

namespace physkit {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + file.string() + " for writing");
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed for " + file.string());
}

// ---------------------------------------------------------------- OBJ

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view token, T& value) {
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

TriangleMesh parse_obj(const std::string& text, const std::string& source_name) {
  TriangleMesh mesh;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) {
    throw Error(Errc::MeshParseError, fmt::format("{}:{}: {}", source_name, line_no, what));
  };
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto tokens = split_ws(line);
    if (tokens[0] == "v") {
      if (tokens.size() < 4) fail("vertex record needs three coordinates");
      Vec3 v;
      for (int k = 0; k < 3; ++k) {
        if (!parse_number(tokens[k + 1], v[k])) fail(fmt::format("bad coordinate '{}'", tokens[k + 1]));
      }
      mesh.vertices.push_back(v);
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) fail("face record needs at least three vertices");
      std::vector<int> idx;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        std::string_view t = tokens[k];
        t = t.substr(0, t.find('/'));
        long value = 0;
        if (!parse_number(t, value) || value == 0) fail(fmt::format("bad face index '{}'", tokens[k]));
        const long n = static_cast<long>(mesh.vertices.size());
        const long resolved = value > 0 ? value - 1 : n + value;
        if (resolved < 0 || resolved >= n) fail(fmt::format("face index {} out of range", value));
        idx.push_back(static_cast<int>(resolved));
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
    // other records (vn, vt, usemtl, mtllib, o, g, s, ...) are ignored
  }
  return mesh;
}

TriangleMesh read_obj(const fs::path& file) {
  if (!fs::exists(file)) throw Error(Errc::MissingFile, file.string());
  return parse_obj(read_text_file(file), file.string());
}

std::string format_obj(const TriangleMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 48 + mesh.faces.size() * 24);
  for (const auto& v : mesh.vertices) out += fmt::format("v {} {} {}\n", v.x(), v.y(), v.z());
  for (const auto& f : mesh.faces) out += fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
  return out;
}

void write_obj(const TriangleMesh& mesh, const fs::path& file) { write_text_file(file, format_obj(mesh)); }

std::size_t drop_degenerate_faces(TriangleMesh& mesh, double min_area) {
  std::vector<Face> kept;
  kept.reserve(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (mesh.face_area(f) >= min_area) kept.push_back(mesh.faces[f]);
  }
  const std::size_t dropped = mesh.faces.size() - kept.size();
  mesh.faces = std::move(kept);
  return dropped;
}

// ---------------------------------------------------------------- JSON

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
  throw Error(Errc::SchemaViolation, fmt::format("{}: {}", path, what));
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) schema_fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(path + "." + key, "missing field");
  return *it;
}

std::string get_string(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_string()) schema_fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

double get_number(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number()) schema_fail(path + "." + key, "expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number_integer()) schema_fail(path + "." + key, "expected an integer");
  return v.get<int>();
}

std::optional<Vec3> get_opt_vec(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (v.is_null()) return std::nullopt;
  if (!v.is_array() || v.size() != 3) schema_fail(path + "." + key, "expected null or a 3-vector");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) schema_fail(fmt::format("{}.{}[{}]", path, key, i), "expected a number");
    out[i] = v[i].get<double>();
  }
  return out;
}

std::optional<int> get_opt_int(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number_integer()) schema_fail(path + "." + key, "expected null or an integer");
  return v.get<int>();
}

}  // namespace

json constraint_to_json(const KinematicConstraint& c) {
  json j;
  j["kind"] = std::string(to_string(c.kind));
  j["parent_part"] = c.parent_part ? json(*c.parent_part) : json(nullptr);
  j["child_part"] = c.child_part ? json(*c.child_part) : json(nullptr);
  j["direction"] = c.direction ? vec_json(*c.direction) : json(nullptr);
  j["pivot"] = c.pivot ? vec_json(*c.pivot) : json(nullptr);
  j["range"] = c.range ? json::array({c.range->lo, c.range->hi}) : json(nullptr);
  j["finalized"] = c.finalized;
  return j;
}

KinematicConstraint constraint_from_json(const json& doc, const std::string& path) {
  KinematicConstraint c;
  const std::string kind = get_string(doc, "kind", path);
  auto parsed = parse_kind(kind);
  if (!parsed) schema_fail(path + ".kind", "unknown kinematic kind '" + kind + "'");
  c.kind = *parsed;
  c.parent_part = get_opt_int(doc, "parent_part", path);
  c.child_part = get_opt_int(doc, "child_part", path);
  c.direction = get_opt_vec(doc, "direction", path);
  c.pivot = get_opt_vec(doc, "pivot", path);
  const json& r = field(doc, "range", path);
  if (!r.is_null()) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      schema_fail(path + ".range", "expected null or [lo, hi]");
    }
    c.range = MotionRange{r[0].get<double>(), r[1].get<double>()};
  }
  const json& fin = field(doc, "finalized", path);
  if (!fin.is_boolean()) schema_fail(path + ".finalized", "expected a boolean");
  c.finalized = fin.get<bool>();
  return c;
}

json asset_to_json(const ObjectAsset& asset) {
  json doc;
  doc["format_version"] = kAssetFormatVersion;
  doc["object_name"] = asset.object_name;
  doc["category"] = asset.category;
  doc["provenance"] = asset.provenance;
  doc["absolute_scale"] = {{"length_cm", asset.absolute_scale.length_cm},
                           {"width_cm", asset.absolute_scale.width_cm},
                           {"height_cm", asset.absolute_scale.height_cm}};
  json parts = json::array();
  for (const auto& p : asset.parts) {
    json jp;
    jp["id"] = p.id;
    jp["name"] = p.name;
    jp["mesh"] = fmt::format("part_{}.obj", p.id);
    jp["material"] = {{"name", p.material.name},
                      {"youngs_modulus_gpa", p.material.youngs_modulus},
                      {"poisson_ratio", p.material.poisson_ratio},
                      {"density_g_cm3", p.material.density}};
    jp["affordance_rank"] = p.affordance_rank;
    jp["descriptions"] = {{"basic", p.descriptions.basic},
                          {"functional", p.descriptions.functional},
                          {"kinematic", p.descriptions.kinematic},
                          {"grasped", p.descriptions.grasped}};
    parts.push_back(std::move(jp));
  }
  doc["parts"] = std::move(parts);
  json constraints = json::array();
  for (const auto& c : asset.constraints) constraints.push_back(constraint_to_json(c));
  doc["constraints"] = std::move(constraints);
  return doc;
}

ObjectAsset asset_from_json(const json& doc) {
  const std::string root = "asset";
  if (!doc.is_object()) schema_fail(root, "expected an object");
  const int version = get_int(doc, "format_version", root);
  if (version != kAssetFormatVersion) schema_fail(root + ".format_version", fmt::format("unsupported version {}", version));
  ObjectAsset a;
  a.object_name = get_string(doc, "object_name", root);
  a.category = get_string(doc, "category", root);
  a.provenance = get_string(doc, "provenance", root);
  const json& scale = field(doc, "absolute_scale", root);
  a.absolute_scale.length_cm = get_number(scale, "length_cm", "absolute_scale");
  a.absolute_scale.width_cm = get_number(scale, "width_cm", "absolute_scale");
  a.absolute_scale.height_cm = get_number(scale, "height_cm", "absolute_scale");

  const json& parts = field(doc, "parts", root);
  if (!parts.is_array()) schema_fail("parts", "expected an array");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string path = fmt::format("parts[{}]", i);
    const json& jp = parts[i];
    Part p;
    p.id = get_int(jp, "id", path);
    p.name = get_string(jp, "name", path);
    const json& m = field(jp, "material", path);
    p.material.name = get_string(m, "name", path + ".material");
    p.material.youngs_modulus = get_number(m, "youngs_modulus_gpa", path + ".material");
    p.material.poisson_ratio = get_number(m, "poisson_ratio", path + ".material");
    p.material.density = get_number(m, "density_g_cm3", path + ".material");
    p.affordance_rank = get_int(jp, "affordance_rank", path);
    const json& d = field(jp, "descriptions", path);
    p.descriptions.basic = get_string(d, "basic", path + ".descriptions");
    p.descriptions.functional = get_string(d, "functional", path + ".descriptions");
    p.descriptions.kinematic = get_string(d, "kinematic", path + ".descriptions");
    p.descriptions.grasped = get_string(d, "grasped", path + ".descriptions");
    a.parts.push_back(std::move(p));
  }
  const json& constraints = field(doc, "constraints", root);
  if (!constraints.is_array()) schema_fail("constraints", "expected an array");
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    a.constraints.push_back(constraint_from_json(constraints[i], fmt::format("constraints[{}]", i)));
  }
  return a;
}

std::string canonical_dump(const json& doc) { return doc.dump(2) + "\n"; }

ObjectAsset load_asset(const fs::path& dir, const LoadOptions& options) {
  const fs::path doc_path = dir / "asset.json";
  if (!fs::exists(doc_path)) throw Error(Errc::MissingFile, doc_path.string());
  json doc;
  try {
    doc = json::parse(read_text_file(doc_path));
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaViolation, fmt::format("{}: {}", doc_path.string(), e.what()));
  }
  ObjectAsset asset = asset_from_json(doc);
  for (std::size_t i = 0; i < asset.parts.size(); ++i) {
    auto& part = asset.parts[i];
    const std::string mesh_name = get_string(doc["parts"][i], "mesh", fmt::format("parts[{}]", i));
    const fs::path mesh_path = dir / mesh_name;
    if (!fs::exists(mesh_path)) throw Error(Errc::MissingFile, mesh_path.string());
    part.mesh = read_obj(mesh_path);
    if (auto dropped = drop_degenerate_faces(part.mesh); dropped > 0) {
      spdlog::warn("{}: dropped {} degenerate face(s) from part {}", dir.string(), dropped, part.id);
    }
  }
  auto violations = validate_asset(asset, options.validation);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw Error(Errc::SchemaViolation,
                fmt::format("{} at {}: {}", to_string(v.code), v.path, v.message));
  }
  return asset;
}

void save_asset(const ObjectAsset& asset, const fs::path& dir, const ValidationOptions& options) {
  auto violations = validate_asset(asset, options);
  if (!violations.empty()) throw Error(Errc::ValidationError, format_violations(violations));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "asset.json", canonical_dump(asset_to_json(asset)));
  for (const auto& p : asset.parts) write_obj(p.mesh, dir / fmt::format("part_{}.obj", p.id));
}

}  // namespace physkit
