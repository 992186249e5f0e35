#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace physkit {

/// Record of one CLI run, stored at `<primary output>.manifest.json`.
struct JobManifest {
  std::string command;
  std::vector<std::string> inputs;
  std::string config_hash;  // over command, options and effective config
  std::string input_hash;   // over input file contents
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string status;       // "ok", "failed" or "skipped"
  std::string error;

  bool operator==(const JobManifest&) const = default;
};

nlohmann::json manifest_to_json(const JobManifest& m);
JobManifest manifest_from_json(const nlohmann::json& j);

std::filesystem::path manifest_path(const std::filesystem::path& primary_output);
std::optional<JobManifest> read_manifest(const std::filesystem::path& primary_output);
void write_manifest(const JobManifest& m, const std::filesystem::path& primary_output);

/// SHA-256 over the paths' contents; directories are walked in sorted order
/// and hashed by relative path and content. Missing paths hash as absent.
std::string hash_inputs(const std::vector<std::string>& paths);

/// True when a previous successful run with the same hashes left every
/// output in place.
bool is_up_to_date(const std::optional<JobManifest>& previous, const JobManifest& next);

}  // namespace physkit
