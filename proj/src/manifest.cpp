#include "physkit/manifest.hpp"

#include <algorithm>

#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/hash.hpp"

namespace physkit {

namespace fs = std::filesystem;
using nlohmann::json;

json manifest_to_json(const JobManifest& m) {
  return json{{"command", m.command}, {"inputs", m.inputs},   {"config_hash", m.config_hash},
              {"input_hash", m.input_hash}, {"seed", m.seed}, {"outputs", m.outputs},
              {"status", m.status},   {"error", m.error}};
}

JobManifest manifest_from_json(const json& j) {
  try {
    JobManifest m;
    m.command = j.at("command").get<std::string>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.input_hash = j.at("input_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.status = j.at("status").get<std::string>();
    m.error = j.value("error", "");
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("manifest: ") + e.what());
  }
}

fs::path manifest_path(const fs::path& primary_output) {
  fs::path p = primary_output;
  while (p.has_filename() == false && p.has_parent_path() && p != p.parent_path()) p = p.parent_path();
  return fs::path(p.string() + ".manifest.json");
}

std::optional<JobManifest> read_manifest(const fs::path& primary_output) {
  const fs::path file = manifest_path(primary_output);
  if (!fs::exists(file)) return std::nullopt;
  const json doc = json::parse(read_text_file(file), nullptr, false);
  if (doc.is_discarded()) return std::nullopt;
  try {
    return manifest_from_json(doc);
  } catch (const Error&) {
    return std::nullopt;
  }
}

void write_manifest(const JobManifest& m, const fs::path& primary_output) {
  const fs::path file = manifest_path(primary_output);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_text_file(file, canonical_dump(manifest_to_json(m)));
}

std::string hash_inputs(const std::vector<std::string>& paths) {
  std::string buf;
  for (const std::string& p : paths) {
    buf += "input " + p + "\n";
    const fs::path path(p);
    if (fs::is_regular_file(path)) {
      buf += sha256_hex(read_text_file(path)) + "\n";
    } else if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(path)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        buf += fs::relative(f, path).generic_string() + " " + sha256_hex(read_text_file(f)) + "\n";
      }
    } else {
      buf += "absent\n";
    }
  }
  return sha256_hex(buf);
}

bool is_up_to_date(const std::optional<JobManifest>& previous, const JobManifest& next) {
  if (!previous) return false;
  if (previous->status != "ok" && previous->status != "skipped") return false;
  if (previous->command != next.command || previous->config_hash != next.config_hash ||
      previous->input_hash != next.input_hash || previous->seed != next.seed) {
    return false;
  }
  return std::all_of(previous->outputs.begin(), previous->outputs.end(),
                     [](const std::string& o) { return fs::exists(o); });
}

}  // namespace physkit
