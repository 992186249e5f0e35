#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "physkit/annotate.hpp"

namespace physkit {

struct VlmImage {
  std::string caption;  // "Part_<label> (image_<k>)"
  RgbImage image;
};

struct VlmRequest {
  std::string model = "gpt-4o";
  double temperature = 0.0;
  std::string system_text;
  std::vector<VlmImage> images;
  std::vector<int> part_labels;  // parts covered by this request
};

/// SHA-256 over a canonical byte serialization of the request (model,
/// temperature, system text, each caption and raw pixel buffer).
std::string request_hash(const VlmRequest& request);

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  /// One attempt. Throws BackendUnavailable, RateLimited or Timeout.
  virtual std::string complete(const VlmRequest& request) = 0;
};

/// Offline backend: `<dir>/<request_hash>.txt` if present, else `<dir>/default.json`.
class MockBackend : public VlmBackend {
 public:
  explicit MockBackend(std::filesystem::path dir);
  std::string complete(const VlmRequest& request) override;
  std::size_t calls() const { return calls_; }

 private:
  std::filesystem::path dir_;
  std::size_t calls_ = 0;
};

struct HttpBackendConfig {
  /// Base URL of an OpenAI-compatible API, e.g. "https://api.openai.com/v1".
  std::string endpoint = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60000};
};

/// POSTs `<endpoint>/chat/completions` with the system text and one
/// caption + base64 PNG pair per image.
class HttpBackend : public VlmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  std::string complete(const VlmRequest& request) override;

 private:
  HttpBackendConfig config_;
};

/// Request body sent by HttpBackend (exposed for tests and logging).
nlohmann::json chat_completion_body(const VlmRequest& request);

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  /// Injectable for tests.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Calls the backend with exponential backoff between failed attempts and
/// logs the request hash. Rethrows the last error after `attempts` tries.
std::string query_vlm(VlmBackend& backend, const VlmRequest& request, const RetryPolicy& retry = {});

struct AnnotateOptions {
  std::string model = "gpt-4o";
  /// Requests carry at most this many images; larger prompts are split per part.
  std::size_t max_images_per_request = 16;
  RetryPolicy retry;
};

/// Builds one or more requests from a prompt.
std::vector<VlmRequest> make_requests(const Prompt& prompt, const AnnotateOptions& options);

/// Queries each request, keeps from each response only the parts it was asked
/// about, and merges (object-level fields from the first response).
RawAnnotation annotate_with_vlm(VlmBackend& backend, const Prompt& prompt, const AnnotateOptions& options = {});

}  // namespace physkit
