#include "physkit/physfeat.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <regex>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/geometry.hpp"
#include "physkit/rng.hpp"

namespace physkit {

static_assert(std::endian::native == std::endian::little, "voxel codec assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'K', 'V', 'O', 'X', 'E', 'L', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kNameWidth = 16;
constexpr double kIdScale = 64.0;
constexpr double kTypeScale = 5.0;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw Error(Errc::SchemaViolation, "voxel file truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw Error(Errc::SchemaViolation, "voxel file truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  if (out.empty()) out.emplace_back("<empty>");
  return out;
}

std::vector<double> l2_normalized(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(Errc::EmbedderUnavailable, "embedding has zero or non-finite norm");
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

const std::array<std::string_view, kPhysChannels>& phys_channel_names() {
  static const std::array<std::string_view, kPhysChannels> names = {
      "scale",     "affordance", "density",   "kin_child", "kin_parent", "kin_dir_x",   "kin_dir_y",
      "kin_dir_z", "kin_loc_x",  "kin_loc_y", "kin_loc_z", "kin_range_lo", "kin_range_hi", "kin_type"};
  return names;
}

PhysVector pack_phys(const PhysRecord& r) {
  return {r.scale,
          r.affordance,
          r.density,
          r.kin_child,
          r.kin_parent,
          r.kin_direction[0],
          r.kin_direction[1],
          r.kin_direction[2],
          r.kin_location[0],
          r.kin_location[1],
          r.kin_location[2],
          r.kin_range[0],
          r.kin_range[1],
          r.kin_type};
}

PhysRecord unpack_phys(std::span<const double> v) {
  if (v.size() != static_cast<std::size_t>(kPhysChannels)) {
    throw Error(Errc::WrongArity, fmt::format("expected {} channels, got {}", kPhysChannels, v.size()));
  }
  PhysRecord r;
  r.scale = v[0];
  r.affordance = v[1];
  r.density = v[2];
  r.kin_child = v[3];
  r.kin_parent = v[4];
  r.kin_direction = {v[5], v[6], v[7]};
  r.kin_location = {v[8], v[9], v[10]};
  r.kin_range = {v[11], v[12]};
  r.kin_type = v[13];
  return r;
}

PhysRecord part_record(const ObjectAsset& asset, int part_id) {
  const Part* part = asset.find_part(part_id);
  if (!part) throw Error(Errc::UnknownPart, fmt::format("part {} not in asset", part_id));
  PhysRecord r;
  r.scale = asset.absolute_scale.max_dim();
  r.affordance = part->affordance_rank;
  r.density = part->material.density;
  r.kin_type = kind_code(KinematicKind::E);
  const KinematicConstraint* c = asset.constraint_for_child(part_id);
  if (c && has_parent_child(c->kind)) {
    r.kin_child = *c->child_part;
    r.kin_parent = c->parent_part.value_or(0);
    if (c->direction) r.kin_direction = {c->direction->x(), c->direction->y(), c->direction->z()};
    if (c->pivot) r.kin_location = {c->pivot->x(), c->pivot->y(), c->pivot->z()};
    if (c->range) r.kin_range = {c->range->lo, c->range->hi};
    r.kin_type = kind_code(c->kind);
  }
  return r;
}

VoxelGrid voxelize(const ObjectAsset& asset, const VoxelizeOptions& options) {
  if (options.resolution < 1 || options.resolution > 4096) {
    throw Error(Errc::InvalidArgument, fmt::format("voxel resolution {} out of range [1, 4096]", options.resolution));
  }
  for (const Part& p : asset.parts) {
    if (p.material.name.empty()) throw Error(Errc::UnannotatedPart, fmt::format("part {} has no material", p.id));
  }
  for (std::size_t i = 0; i < asset.constraints.size(); ++i) {
    if (!asset.constraints[i].finalized) {
      throw Error(Errc::UnannotatedPart, fmt::format("constraint {} is not finalized", i));
    }
  }
  const ObjectSamples samples = sample_object(asset, options.samples, options.seed);
  const int res = options.resolution;
  auto cell = [res](double x) {
    const int c = static_cast<int>(std::floor((x + 1.0) * 0.5 * res));
    return std::clamp(c, 0, res - 1);
  };
  // linear cell index -> (part id -> count); std::map keeps (x, y, z) order.
  std::map<std::int64_t, std::map<int, int>> counts;
  for (std::size_t i = 0; i < samples.points.size(); ++i) {
    const Vec3& p = samples.points[i];
    const std::int64_t key =
        (static_cast<std::int64_t>(cell(p.x())) * res + cell(p.y())) * res + cell(p.z());
    ++counts[key][samples.part_ids[i]];
  }
  std::map<int, PhysRecord> records;
  for (const Part& p : asset.parts) records.emplace(p.id, part_record(asset, p.id));

  VoxelGrid grid;
  grid.resolution = res;
  grid.occupied.reserve(counts.size());
  for (const auto& [key, per_part] : counts) {
    int best = 0, best_count = -1;
    for (const auto& [id, n] : per_part) {
      if (n > best_count) {
        best = id;
        best_count = n;
      }
    }
    const int z = static_cast<int>(key % res);
    const int y = static_cast<int>((key / res) % res);
    const int x = static_cast<int>(key / res / res);
    grid.occupied.push_back({x, y, z});
    grid.owner.push_back(best);
    grid.phys.push_back(records.at(best));
  }
  return grid;
}

PhysRecord normalize_record(const PhysRecord& r) {
  PhysRecord o = r;
  o.scale = r.scale / 1000.0;
  o.affordance = (r.affordance - 1.0) / 9.0;
  o.density = r.density / 10.0;
  o.kin_child = r.kin_child / kIdScale;
  o.kin_parent = r.kin_parent / kIdScale;
  o.kin_range = {r.kin_range[0] / M_PI, r.kin_range[1] / M_PI};
  o.kin_type = r.kin_type / kTypeScale;
  return o;
}

PhysRecord denormalize_record(const PhysRecord& r) {
  PhysRecord o = r;
  o.scale = r.scale * 1000.0;
  o.affordance = r.affordance * 9.0 + 1.0;
  o.density = r.density * 10.0;
  o.kin_child = r.kin_child * kIdScale;
  o.kin_parent = r.kin_parent * kIdScale;
  o.kin_range = {r.kin_range[0] * M_PI, r.kin_range[1] * M_PI};
  o.kin_type = r.kin_type * kTypeScale;
  return o;
}

VoxelGrid normalize_channels(VoxelGrid grid) {
  for (PhysRecord& r : grid.phys) r = normalize_record(r);
  grid.normalized = true;
  return grid;
}

VoxelGrid denormalize_channels(VoxelGrid grid) {
  for (PhysRecord& r : grid.phys) r = denormalize_record(r);
  grid.normalized = false;
  return grid;
}

HashingEmbedder::HashingEmbedder(std::uint64_t seed) : projection_(kEmbeddingDim * kEmbeddingDim) {
  Rng rng(seed);
  const double a = 1.0 / std::sqrt(static_cast<double>(kEmbeddingDim));
  for (double& w : projection_) w = (rng.next_u64() & 1) ? a : -a;
}

std::vector<double> HashingEmbedder::embed(std::string_view text) {
  std::vector<double> bins(kEmbeddingDim, 0.0);
  for (const std::string& tok : tokenize(text)) {
    const std::uint64_t h = fnv1a(tok);
    bins[h % kEmbeddingDim] += (h >> 63) ? 1.0 : -1.0;
  }
  std::vector<double> out(kEmbeddingDim, 0.0);
  for (int i = 0; i < kEmbeddingDim; ++i) {
    const double* row = &projection_[static_cast<std::size_t>(i) * kEmbeddingDim];
    double s = 0.0;
    for (int j = 0; j < kEmbeddingDim; ++j) s += row[j] * bins[j];
    out[i] = s;
  }
  return out;
}

HttpEmbedder::HttpEmbedder(std::string url, int timeout_sec) : url_(std::move(url)), timeout_sec_(timeout_sec) {}

std::vector<double> HttpEmbedder::embed(std::string_view text) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url_, m, kUrl)) throw Error(Errc::EmbedderUnavailable, "bad embedder URL '" + url_ + "'");
  httplib::Client client(m[1].str());
  client.set_connection_timeout(timeout_sec_, 0);
  client.set_read_timeout(timeout_sec_, 0);
  const std::string path = m[2].matched ? m[2].str() : "/";
  const auto res = client.Post(path, nlohmann::json{{"input", std::string(text)}}.dump(), "application/json");
  if (!res) throw Error(Errc::EmbedderUnavailable, "embedder unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(Errc::EmbedderUnavailable, fmt::format("embedder returned {}", res->status));
  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.contains("embedding") || !body["embedding"].is_array()) {
    throw Error(Errc::EmbedderUnavailable, "embedder response lacks an embedding array");
  }
  std::vector<double> v;
  for (const auto& x : body["embedding"]) {
    if (!x.is_number()) throw Error(Errc::EmbedderUnavailable, "embedding contains a non-number");
    v.push_back(x.get<double>());
  }
  if (v.size() != static_cast<std::size_t>(kEmbeddingDim)) {
    throw Error(Errc::EmbedderUnavailable, fmt::format("embedding has {} dims, expected {}", v.size(), kEmbeddingDim));
  }
  return v;
}

SemEmbedding embed_descriptions(TextEmbedder& embedder, const DescriptionSet& desc) {
  SemEmbedding out;
  const std::string_view texts[3] = {desc.basic, desc.functional, desc.kinematic};
  for (int i = 0; i < 3; ++i) {
    std::vector<double> v = embedder.embed(texts[i]);
    if (v.size() != static_cast<std::size_t>(kEmbeddingDim)) {
      throw Error(Errc::EmbedderUnavailable, fmt::format("embedder returned {} dims", v.size()));
    }
    out[i] = l2_normalized(std::move(v));
  }
  return out;
}

void attach_semantics(VoxelGrid& grid, const ObjectAsset& asset, TextEmbedder& embedder) {
  grid.sem.clear();
  for (int id : grid.owner) {
    if (grid.sem.count(id)) continue;
    const Part* p = asset.find_part(id);
    if (!p) throw Error(Errc::UnknownPart, fmt::format("voxel owner {} not in asset", id));
    grid.sem.emplace(id, embed_descriptions(embedder, p->descriptions));
  }
}

std::string encode_voxels(const VoxelGrid& grid) {
  const std::size_t n = grid.occupied.size();
  if (grid.phys.size() != n || grid.owner.size() != n) {
    throw Error(Errc::ShapeMismatch, "voxel grid arrays differ in length");
  }
  if (grid.resolution < 1 || grid.resolution > 65535) throw Error(Errc::InvalidArgument, "resolution out of range");
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.resolution));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  put<std::uint32_t>(out, (grid.normalized ? 1u : 0u) | (grid.sem.empty() ? 0u : 2u));
  put<std::uint32_t>(out, kPhysChannels);
  for (std::string_view name : phys_channel_names()) {
    std::string padded(name);
    padded.resize(kNameWidth, '\0');
    out += padded;
  }
  for (const auto& c : grid.occupied) {
    for (int k = 0; k < 3; ++k) {
      if (c[k] < 0 || c[k] >= grid.resolution) throw Error(Errc::ValidationError, "voxel coordinate out of range");
      put<std::uint16_t>(out, static_cast<std::uint16_t>(c[k]));
    }
    put<std::uint16_t>(out, 0);
  }
  for (int id : grid.owner) put<std::int32_t>(out, id);
  for (const PhysRecord& r : grid.phys) {
    for (double v : pack_phys(r)) put<float>(out, static_cast<float>(v));
  }
  if (!grid.sem.empty()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.sem.size()));
    for (const auto& [id, emb] : grid.sem) {
      put<std::int32_t>(out, id);
      for (const auto& col : emb) {
        if (col.size() != static_cast<std::size_t>(kEmbeddingDim)) throw Error(Errc::ShapeMismatch, "embedding width");
        for (double v : col) put<float>(out, static_cast<float>(v));
      }
    }
  }
  return out;
}

VoxelGrid decode_voxels(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(Errc::SchemaViolation, "not a voxel file (bad magic)");
  }
  if (const auto v = in.get<std::uint32_t>(); v != kVersion) {
    throw Error(Errc::SchemaViolation, fmt::format("unsupported voxel file version {}", v));
  }
  VoxelGrid grid;
  grid.resolution = static_cast<int>(in.get<std::uint32_t>());
  const std::uint32_t n = in.get<std::uint32_t>();
  const std::uint32_t flags = in.get<std::uint32_t>();
  grid.normalized = flags & 1u;
  if (const auto ch = in.get<std::uint32_t>(); ch != static_cast<std::uint32_t>(kPhysChannels)) {
    throw Error(Errc::WrongArity, fmt::format("voxel file has {} channels, expected {}", ch, kPhysChannels));
  }
  for (std::string_view expect : phys_channel_names()) {
    std::string_view name = in.take(kNameWidth);
    name = name.substr(0, name.find('\0'));
    if (name != expect) throw Error(Errc::SchemaViolation, fmt::format("channel '{}' where '{}' expected", name, expect));
  }
  grid.occupied.resize(n);
  for (auto& c : grid.occupied) {
    for (int k = 0; k < 3; ++k) c[k] = in.get<std::uint16_t>();
    in.get<std::uint16_t>();
  }
  grid.owner.resize(n);
  for (int& id : grid.owner) id = in.get<std::int32_t>();
  grid.phys.resize(n);
  for (PhysRecord& r : grid.phys) {
    PhysVector v;
    for (double& x : v) x = in.get<float>();
    r = unpack_phys(v);
  }
  if (flags & 2u) {
    const std::uint32_t parts = in.get<std::uint32_t>();
    for (std::uint32_t p = 0; p < parts; ++p) {
      const int id = in.get<std::int32_t>();
      SemEmbedding emb;
      for (auto& col : emb) {
        col.resize(kEmbeddingDim);
        for (double& x : col) x = in.get<float>();
      }
      grid.sem.emplace(id, std::move(emb));
    }
  }
  if (!in.done()) throw Error(Errc::SchemaViolation, "trailing bytes after voxel payload");
  return grid;
}

void write_voxels(const VoxelGrid& grid, const std::filesystem::path& file) {
  write_text_file(file, encode_voxels(grid));
}

VoxelGrid read_voxels(const std::filesystem::path& file) { return decode_voxels(read_text_file(file)); }

}  // namespace physkit
