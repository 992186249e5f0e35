#include "physkit/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "physkit/error.hpp"
#include "physkit/lenient_json.hpp"
#include "physkit/validate.hpp"

namespace physkit {

using nlohmann::json;

namespace {

constexpr std::string_view kTemplate =
#include "prompt_template.inc"
    ;

constexpr std::string_view kFirstBlock = "Part_1 (image_1):";
constexpr std::string_view kSecondBlock = "Part_2 (image_2):";
constexpr std::string_view kExample = "\nFor example:";

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

class Violations {
 public:
  void add(const std::string& path, const std::string& msg) { items_.push_back(path + ": " + msg); }
  bool empty() const { return items_.empty(); }
  std::string joined() const {
    std::string out;
    for (const auto& s : items_) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

 private:
  std::vector<std::string> items_;
};

std::optional<int> as_int(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d) && std::abs(d) < 1e9) return static_cast<int>(d);
    return std::nullopt;
  }
  if (v.is_string()) {
    static const std::regex kInt(R"(\s*([+-]?\d+)\s*)");
    std::smatch m;
    const std::string s = v.get<std::string>();
    if (std::regex_match(s, m, kInt)) return std::stoi(m[1]);
  }
  return std::nullopt;
}

std::optional<std::string> string_field(const json& obj, const char* key, const std::string& path, Violations& v,
                                        bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) v.add(path + "." + key, "missing");
    return std::nullopt;
  }
  if (!it->is_string()) {
    v.add(path + "." + key, "expected a string");
    return std::nullopt;
  }
  return it->get<std::string>();
}

std::optional<KinematicKind> parse_movement_type(const json& value, bool allow_cb) {
  if (!value.is_string()) return std::nullopt;
  std::string s = trim(value.get<std::string>());
  // Accept "B" as well as "B." / "B. relative translationally move".
  static const std::regex kLead(R"(^(CB|[A-E])\b.*)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(s, m, kLead)) return std::nullopt;
  std::string code = m[1];
  for (char& c : code) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (code == "CB" && !allow_cb) return std::nullopt;
  return parse_kind(code);
}

MovementGroup parse_group(const json& g, const std::string& path, bool allow_cb, Violations& v) {
  MovementGroup out;
  if (!g.is_object()) {
    v.add(path, "expected an object");
    return out;
  }
  auto labels = g.find("labels_of_movement_group");
  if (labels == g.end()) {
    v.add(path + ".labels_of_movement_group", "missing");
  } else if (labels->is_string()) {
    static const std::regex kPair(R"(\s*(\d+)\s*-\s*(\d+)\s*)");
    std::smatch m;
    const std::string s = labels->get<std::string>();
    if (std::regex_match(s, m, kPair)) {
      out.label_a = std::stoi(m[1]);
      out.label_b = std::stoi(m[2]);
    } else {
      v.add(path + ".labels_of_movement_group", "expected \"<label>-<label>\", got \"" + s + "\"");
    }
  } else if (labels->is_array() && labels->size() == 2 && as_int((*labels)[0]) && as_int((*labels)[1])) {
    out.label_a = *as_int((*labels)[0]);
    out.label_b = *as_int((*labels)[1]);
  } else {
    v.add(path + ".labels_of_movement_group", "expected \"<label>-<label>\"");
  }

  auto type = g.find("movement_type");
  if (type == g.end()) {
    v.add(path + ".movement_type", "missing");
    return out;
  }
  const auto kind = parse_movement_type(*type, allow_cb);
  if (!kind) {
    v.add(path + ".movement_type", allow_cb ? "expected one of A, B, C, D, E, CB" : "expected one of A, B, C, D, E");
    return out;
  }
  out.movement_type = *kind;
  const bool movable = has_parent_child(*kind);
  for (const char* key : {"parent_label", "child_label"}) {
    auto it = g.find(key);
    const bool present = it != g.end() && !it->is_null();
    if (movable && !present) {
      v.add(path + "." + key, fmt::format("required for movement type {}", to_string(*kind)));
    } else if (!movable && present) {
      v.add(path + "." + key, fmt::format("not allowed for movement type {}", to_string(*kind)));
    } else if (present) {
      const auto val = as_int(*it);
      if (!val) {
        v.add(path + "." + key, "expected an integer label");
      } else if (std::string_view(key) == "parent_label") {
        out.parent_label = *val;
      } else {
        out.child_label = *val;
      }
    }
  }
  if (out.parent_label && out.child_label) {
    const std::set<int> group{out.label_a, out.label_b};
    const std::set<int> pc{*out.parent_label, *out.child_label};
    if (group != pc) v.add(path, "parent_label and child_label must be the two labels of the group");
  }
  return out;
}

RawPart parse_part(const json& p, const std::string& path, bool allow_cb, Violations& v) {
  RawPart out;
  if (!p.is_object()) {
    v.add(path, "expected an object");
    return out;
  }
  if (auto it = p.find("label"); it == p.end()) {
    v.add(path + ".label", "missing");
  } else if (auto l = as_int(*it)) {
    out.label = *l;
  } else {
    v.add(path + ".label", "expected an integer");
  }
  if (auto s = string_field(p, "name", path, v)) out.name = *s;
  if (auto s = string_field(p, "material", path, v)) out.material = *s;
  if (auto it = p.find("density"); it == p.end()) {
    v.add(path + ".density", "missing");
  } else if (auto d = parse_density(*it)) {
    if (*d < 0.0) v.add(path + ".density", "must be non-negative");
    out.density = *d;
  } else {
    v.add(path + ".density", "expected a number with optional unit g/cm^3");
  }
  if (auto it = p.find("priority_rank"); it == p.end()) {
    v.add(path + ".priority_rank", "missing");
  } else if (auto r = as_int(*it)) {
    if (*r < 1 || *r > 10) v.add(path + ".priority_rank", fmt::format("{} outside [1, 10]", *r));
    out.priority_rank = *r;
  } else {
    v.add(path + ".priority_rank", "expected an integer");
  }
  if (auto it = p.find("neighbors"); it != p.end()) {
    if (!it->is_array()) {
      v.add(path + ".neighbors", "expected an array");
    } else {
      for (std::size_t i = 0; i < it->size(); ++i) {
        out.neighbors.push_back(parse_group((*it)[i], fmt::format("{}.neighbors[{}]", path, i), allow_cb, v));
      }
    }
  }
  if (auto s = string_field(p, "Basic_description", path, v)) out.descriptions.basic = *s;
  if (auto s = string_field(p, "Functional_description", path, v)) out.descriptions.functional = *s;
  if (auto s = string_field(p, "Movement_description", path, v)) out.descriptions.kinematic = *s;
  if (auto s = string_field(p, "Grasped_description", path, v)) out.descriptions.grasped = *s;
  return out;
}

struct MaterialRow {
  const char* name;
  double youngs_gpa;
  double poisson;
};

// Typical room-temperature values.
constexpr MaterialRow kMaterials[] = {
    {"plastic", 2.5, 0.38},   {"wood", 11.0, 0.35},     {"steel", 200.0, 0.29},   {"stainless steel", 193.0, 0.29},
    {"metal", 200.0, 0.3},    {"iron", 211.0, 0.29},    {"aluminum", 69.0, 0.33}, {"aluminium", 69.0, 0.33},
    {"copper", 117.0, 0.34},  {"brass", 100.0, 0.34},   {"glass", 70.0, 0.22},    {"ceramic", 300.0, 0.22},
    {"porcelain", 70.0, 0.2}, {"rubber", 0.05, 0.49},   {"silicone", 0.01, 0.49}, {"fabric", 0.1, 0.3},
    {"leather", 0.1, 0.4},    {"paper", 3.0, 0.3},      {"cardboard", 1.0, 0.3},  {"stone", 50.0, 0.25},
    {"marble", 50.0, 0.27},   {"concrete", 30.0, 0.2},  {"foam", 0.01, 0.3},      {"titanium", 116.0, 0.32},
};

}  // namespace

std::string_view prompt_template() { return kTemplate; }

std::string build_system_text(const std::vector<int>& part_labels) {
  const std::string_view t = kTemplate;
  const std::size_t first = t.find(kFirstBlock);
  const std::size_t second = t.find(kSecondBlock);
  const std::size_t example = t.find(kExample);
  const std::string block(t.substr(first, second - first));
  std::string out(t.substr(0, first));
  for (std::size_t k = 0; k < part_labels.size(); ++k) {
    std::string b = replace_all(block, "Part_1", fmt::format("Part_{}", part_labels[k]));
    b = replace_all(b, "image_1", fmt::format("image_{}", k + 1));
    out += b;
  }
  out += t.substr(example);
  return out;
}

Prompt build_prompt(const ObjectAsset& asset, const PromptOptions& options) {
  Prompt prompt;
  std::vector<int> labels;
  for (const Part& p : asset.parts) labels.push_back(p.id);
  prompt.system_text = build_system_text(labels);

  const auto views = default_property_views(options.resolution);
  std::vector<Fragments> frags;
  frags.reserve(views.size());
  for (const auto& v : views) frags.push_back(rasterize_fragments(asset, v));

  for (const Part& p : asset.parts) {
    PartImage img;
    img.part_id = p.id;
    for (std::size_t v = 0; v < frags.size(); ++v) {
      const std::size_t n = static_cast<std::size_t>(std::count(frags[v].part_id.begin(), frags[v].part_id.end(), p.id));
      if (n > img.red_pixels) {
        img.red_pixels = n;
        img.view_index = static_cast<int>(v);
      }
    }
    if (img.red_pixels == 0) {
      prompt.occlusion_warnings.push_back(p.id);
      spdlog::warn("OcclusionWarning: part {} of '{}' is not visible from any default view", p.id, asset.object_name);
    }
    img.image = render_isolation(asset, p.id, views[static_cast<std::size_t>(img.view_index)]);
    prompt.images.push_back(std::move(img));
  }
  return prompt;
}

std::optional<double> parse_density(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (!value.is_string()) return std::nullopt;
  static const std::regex kDensity(R"(\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(?:g\s*/\s*cm(?:\^3|3|\xC2\xB3))?\s*)");
  std::smatch m;
  const std::string s = value.get<std::string>();
  if (!std::regex_match(s, m, kDensity)) return std::nullopt;
  return std::stod(m[1]);
}

std::optional<AbsoluteScale> parse_dimension(std::string_view text) {
  static const std::regex kDim(
      R"(\s*(\d+\.?\d*|\.\d+)\s*[*xX]\s*(\d+\.?\d*|\.\d+)\s*[*xX]\s*(\d+\.?\d*|\.\d+)\s*(?:cm)?\s*)");
  std::cmatch m;
  if (!std::regex_match(text.begin(), text.end(), m, kDim)) return std::nullopt;
  return AbsoluteScale{std::stod(m[1]), std::stod(m[2]), std::stod(m[3])};
}

RawAnnotation raw_from_json(const json& doc, bool allow_cb) {
  if (!doc.is_object()) throw Error(Errc::SchemaViolation, "annotation: expected a JSON object");
  Violations v;
  RawAnnotation raw;
  if (auto s = string_field(doc, "object_name", "$", v)) raw.object_name = *s;
  if (auto s = string_field(doc, "category", "$", v)) raw.category = *s;
  if (auto s = string_field(doc, "dimension", "$", v)) {
    raw.dimension = *s;
    if (auto d = parse_dimension(*s)) {
      raw.scale = *d;
      if (!(d->length_cm > 0 && d->width_cm > 0 && d->height_cm > 0)) v.add("$.dimension", "dimensions must be positive");
    } else {
      v.add("$.dimension", "expected \"L*W*H\" in cm, got \"" + *s + "\"");
    }
  }
  auto parts = doc.find("parts");
  if (parts == doc.end() || !parts->is_array() || parts->empty()) {
    v.add("$.parts", "expected a non-empty array");
  } else {
    std::set<int> seen;
    for (std::size_t i = 0; i < parts->size(); ++i) {
      const std::string path = fmt::format("$.parts[{}]", i);
      RawPart p = parse_part((*parts)[i], path, allow_cb, v);
      if (!seen.insert(p.label).second) v.add(path + ".label", fmt::format("duplicate label {}", p.label));
      raw.parts.push_back(std::move(p));
    }
  }
  if (!v.empty()) throw Error(Errc::SchemaViolation, v.joined());
  return raw;
}

RawAnnotation parse_response(std::string_view text) {
  const json doc = parse_model_json(text);
  return raw_from_json(doc, false);
}

json raw_to_json(const RawAnnotation& raw) {
  json parts = json::array();
  for (const RawPart& p : raw.parts) {
    json neighbors = json::array();
    for (const MovementGroup& g : p.neighbors) {
      json jg{{"labels_of_movement_group", fmt::format("{}-{}", g.label_a, g.label_b)},
              {"movement_type", to_string(g.movement_type)}};
      if (g.parent_label) jg["parent_label"] = *g.parent_label;
      if (g.child_label) jg["child_label"] = *g.child_label;
      neighbors.push_back(std::move(jg));
    }
    parts.push_back(json{{"label", p.label},
                         {"name", p.name},
                         {"material", p.material},
                         {"density", p.density},
                         {"priority_rank", p.priority_rank},
                         {"neighbors", std::move(neighbors)},
                         {"Basic_description", p.descriptions.basic},
                         {"Functional_description", p.descriptions.functional},
                         {"Movement_description", p.descriptions.kinematic},
                         {"Grasped_description", p.descriptions.grasped}});
  }
  return json{{"object_name", raw.object_name},
              {"category", raw.category},
              {"dimension", raw.dimension},
              {"parts", std::move(parts)}};
}

RawAnnotation raw_from_asset(const ObjectAsset& asset, bool keep_cb) {
  RawAnnotation raw;
  raw.object_name = asset.object_name;
  raw.category = asset.category;
  raw.scale = asset.absolute_scale;
  raw.dimension = fmt::format("{}*{}*{}", raw.scale.length_cm, raw.scale.width_cm, raw.scale.height_cm);
  for (const Part& p : asset.parts) {
    RawPart rp;
    rp.label = p.id;
    rp.name = p.name;
    rp.material = p.material.name;
    rp.density = p.material.density;
    rp.priority_rank = p.affordance_rank;
    rp.descriptions = p.descriptions;
    for (const KinematicConstraint& c : asset.constraints) {
      if (!has_parent_child(c.kind) || !c.parent_part || !c.child_part) continue;
      if (*c.parent_part != p.id && *c.child_part != p.id) continue;
      const int other = *c.parent_part == p.id ? *c.child_part : *c.parent_part;
      const KinematicKind kind = (c.kind == KinematicKind::CB && !keep_cb) ? KinematicKind::C : c.kind;
      rp.neighbors.push_back({p.id, other, kind, c.parent_part, c.child_part});
    }
    raw.parts.push_back(std::move(rp));
  }
  return raw;
}

MaterialProperties lookup_material(std::string_view name) {
  const std::string key = lower(trim(name));
  for (const MaterialRow& row : kMaterials) {
    if (key == row.name) return {row.youngs_gpa, row.poisson, true};
  }
  return {};
}

AppliedAnnotation apply_annotation(const ObjectAsset& asset, const RawAnnotation& raw, ReviewStatus status) {
  if (status != ReviewStatus::HumanApproved && status != ReviewStatus::HumanEdited) {
    throw Error(Errc::InvalidTransition,
                fmt::format("annotation must be human_approved or human_edited, is {}", to_string(status)));
  }
  std::set<int> part_ids, labels;
  for (const Part& p : asset.parts) part_ids.insert(p.id);
  for (const RawPart& p : raw.parts) labels.insert(p.label);
  if (part_ids != labels) {
    throw Error(Errc::LabelMismatch, fmt::format("annotation labels {} do not match part ids {}",
                                                 fmt::join(labels, ","), fmt::join(part_ids, ",")));
  }

  AppliedAnnotation out;
  out.asset = asset;
  out.asset.object_name = raw.object_name;
  out.asset.category = raw.category;
  out.asset.absolute_scale = raw.scale;
  out.asset.constraints.clear();
  std::set<std::pair<int, int>> seen;
  for (const RawPart& rp : raw.parts) {
    Part& part = *out.asset.find_part(rp.label);
    part.name = rp.name;
    const MaterialProperties m = lookup_material(rp.material);
    if (!m.known) spdlog::warn("unknown material '{}' on part {}; using E = 1 GPa, nu = 0.3", rp.material, rp.label);
    part.material = MaterialSpec{rp.material, m.youngs_modulus_gpa, m.poisson_ratio, rp.density};
    part.affordance_rank = rp.priority_rank;
    part.descriptions = rp.descriptions;
    for (const MovementGroup& g : rp.neighbors) {
      if (!part_ids.count(g.label_a) || !part_ids.count(g.label_b)) {
        throw Error(Errc::LabelMismatch,
                    fmt::format("part {} names movement group {}-{} with an unknown label", rp.label, g.label_a, g.label_b));
      }
      if (!has_parent_child(g.movement_type)) continue;
      if (!seen.insert({*g.parent_label, *g.child_label}).second) continue;
      KinematicConstraint stub;
      stub.kind = g.movement_type;
      stub.parent_part = *g.parent_label;
      stub.child_part = *g.child_label;
      stub.finalized = false;
      out.stubs.push_back(stub);
    }
  }
  const auto violations = validate_asset(out.asset);
  if (!violations.empty()) throw Error(Errc::ValidationError, format_violations(violations));
  return out;
}

}  // namespace physkit
