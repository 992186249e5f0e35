#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "physkit/config.hpp"
#include "physkit/review.hpp"

namespace httplib {
class Server;
}

namespace physkit {

struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceOptions {
  std::filesystem::path root;  // one sub-directory per asset, named by asset id
  RunConfig config;
  Clock clock = utc_now_iso;
};

/// Review backend over an asset root. No authentication; meant for a single
/// local user. Endpoints are listed in docs/api.md.
class ReviewService {
 public:
  explicit ReviewService(ServiceOptions options);
  ~ReviewService();

  /// Routes one request. Never throws; errors become JSON {"error": ...}.
  ServiceResponse dispatch(const std::string& method, const std::string& path, const std::string& body,
                           const std::string& query_kind = "");

  /// Registers every route on `server`.
  void mount(httplib::Server& server);

  /// Serves until stop(); returns false when the port cannot be bound.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it (0 on failure); call serve() next.
  int bind_any_port(const std::string& host);
  void serve();
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready();

 private:
  ServiceResponse list_assets();
  ServiceResponse get_asset(const std::string& id);
  ServiceResponse get_review(const std::string& id);
  ServiceResponse get_file(const std::string& id, const char* name);
  ServiceResponse get_mesh(const std::string& id, int part);
  ServiceResponse get_isolation(const std::string& id, int part);
  ServiceResponse get_candidates(const std::string& id, int child, int parent, const std::string& kind);
  ServiceResponse post_selection(const std::string& id, const std::string& body);
  ServiceResponse post_review(const std::string& id, const std::string& body);

  std::filesystem::path asset_dir(const std::string& id) const;
  std::shared_mutex& asset_mutex(const std::string& id);

  ServiceOptions options_;
  std::string kinematics_hash_;
  std::mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<std::shared_mutex>> asset_mutexes_;
  std::mutex cache_mutex_;
  std::map<std::string, std::string> candidate_cache_;
  std::unique_ptr<httplib::Server> server_;
};

/// Little-endian mesh payload: u32 vertex count, u32 face count,
/// vertex_count x 3 f32 positions, face_count x 3 u32 indices.
std::string encode_mesh(const TriangleMesh& mesh);
TriangleMesh decode_mesh(std::string_view bytes);

}  // namespace physkit
