#include "physkit/vlm.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "physkit/asset_io.hpp"
#include "physkit/error.hpp"
#include "physkit/hash.hpp"
#include "physkit/image_io.hpp"
#include "physkit/lenient_json.hpp"

namespace physkit {

using nlohmann::json;

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_bytes(std::string& out, std::string_view bytes) {
  put_u64(out, bytes.size());
  out.append(bytes);
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

ParsedUrl split_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw Error(Errc::InvalidArgument, "bad endpoint URL '" + url + "'");
  std::string path = m[2].matched ? m[2].str() : "";
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {m[1], path};
}

}  // namespace

std::string request_hash(const VlmRequest& request) {
  std::string buf;
  put_bytes(buf, "physkit-vlm-request-v1");
  put_bytes(buf, request.model);
  put_bytes(buf, fmt::format("{:.17g}", request.temperature));
  put_bytes(buf, request.system_text);
  put_u64(buf, request.images.size());
  for (const VlmImage& img : request.images) {
    put_bytes(buf, img.caption);
    put_u64(buf, static_cast<std::uint64_t>(img.image.width));
    put_u64(buf, static_cast<std::uint64_t>(img.image.height));
    put_bytes(buf, std::string_view(reinterpret_cast<const char*>(img.image.rgb.data()), img.image.rgb.size()));
  }
  return sha256_hex(buf);
}

MockBackend::MockBackend(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string MockBackend::complete(const VlmRequest& request) {
  ++calls_;
  const std::filesystem::path exact = dir_ / (request_hash(request) + ".txt");
  if (std::filesystem::exists(exact)) return read_text_file(exact);
  const std::filesystem::path fallback = dir_ / "default.json";
  if (std::filesystem::exists(fallback)) return read_text_file(fallback);
  throw Error(Errc::BackendUnavailable, "mock backend has no response in " + dir_.string());
}

json chat_completion_body(const VlmRequest& request) {
  json content = json::array();
  for (const VlmImage& img : request.images) {
    content.push_back(json{{"type", "text"}, {"text", img.caption}});
    content.push_back(json{{"type", "image_url"},
                           {"image_url", {{"url", "data:image/png;base64," + base64_encode(encode_png(img.image))}}}});
  }
  return json{{"model", request.model},
              {"temperature", request.temperature},
              {"messages",
               json::array({json{{"role", "system"}, {"content", request.system_text}},
                            json{{"role", "user"}, {"content", std::move(content)}}})}};
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

std::string HttpBackend::complete(const VlmRequest& request) {
  const ParsedUrl url = split_url(config_.endpoint);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const auto res = client.Post(url.path + "/chat/completions", headers, chat_completion_body(request).dump(),
                               "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw Error(Errc::Timeout, "VLM request timed out: " + httplib::to_string(err));
    }
    throw Error(Errc::BackendUnavailable, "VLM endpoint unreachable: " + httplib::to_string(err));
  }
  if (res->status == 429) throw Error(Errc::RateLimited, "VLM endpoint returned 429");
  if (res->status == 408 || res->status == 504) throw Error(Errc::Timeout, fmt::format("VLM endpoint returned {}", res->status));
  if (res->status != 200) throw Error(Errc::BackendUnavailable, fmt::format("VLM endpoint returned {}", res->status));
  const json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw Error(Errc::BackendUnavailable, "VLM endpoint returned non-JSON body");
  try {
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(Errc::BackendUnavailable, "VLM response lacks choices[0].message.content");
  }
}

std::string query_vlm(VlmBackend& backend, const VlmRequest& request, const RetryPolicy& retry) {
  const std::string hash = request_hash(request);
  spdlog::info("VLM request {} ({} images, model {})", hash, request.images.size(), request.model);
  const int attempts = std::max(1, retry.attempts);
  auto backoff = retry.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return backend.complete(request);
    } catch (const Error& e) {
      const bool transient =
          e.code() == Errc::BackendUnavailable || e.code() == Errc::RateLimited || e.code() == Errc::Timeout;
      if (!transient || attempt >= attempts) {
        spdlog::error("VLM request {} failed after {} attempt(s): {}", hash, attempt, e.what());
        throw;
      }
      spdlog::warn("VLM request {} attempt {} failed ({}); retrying in {} ms", hash, attempt, e.what(), backoff.count());
      if (retry.sleep) retry.sleep(backoff);
      else std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * retry.multiplier));
    }
  }
}

std::vector<VlmRequest> make_requests(const Prompt& prompt, const AnnotateOptions& options) {
  const std::size_t per = std::max<std::size_t>(1, options.max_images_per_request);
  std::vector<VlmRequest> out;
  for (std::size_t start = 0; start < prompt.images.size(); start += per) {
    VlmRequest r;
    r.model = options.model;
    const std::size_t end = std::min(prompt.images.size(), start + per);
    for (std::size_t i = start; i < end; ++i) r.part_labels.push_back(prompt.images[i].part_id);
    // A single request carries the prompt's own text; chunks regenerate it for their parts.
    r.system_text = (start == 0 && end == prompt.images.size()) ? prompt.system_text : build_system_text(r.part_labels);
    for (std::size_t i = start; i < end; ++i) {
      r.images.push_back({fmt::format("Part_{} (image_{})", prompt.images[i].part_id, i - start + 1),
                          prompt.images[i].image});
    }
    out.push_back(std::move(r));
  }
  return out;
}

RawAnnotation annotate_with_vlm(VlmBackend& backend, const Prompt& prompt, const AnnotateOptions& options) {
  const auto requests = make_requests(prompt, options);
  if (requests.empty()) throw Error(Errc::InvalidArgument, "prompt has no part images");
  RawAnnotation merged;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const RawAnnotation part = parse_response(query_vlm(backend, requests[i], options.retry));
    if (i == 0) {
      merged.object_name = part.object_name;
      merged.category = part.category;
      merged.dimension = part.dimension;
      merged.scale = part.scale;
    }
    const std::set<int> wanted(requests[i].part_labels.begin(), requests[i].part_labels.end());
    for (const RawPart& p : part.parts) {
      if (wanted.count(p.label)) merged.parts.push_back(p);
    }
  }
  // Prompt order, so chunked and single-shot results compare equal.
  std::map<int, std::size_t> rank;
  for (std::size_t i = 0; i < prompt.images.size(); ++i) rank.emplace(prompt.images[i].part_id, i);
  std::stable_sort(merged.parts.begin(), merged.parts.end(),
                   [&](const RawPart& a, const RawPart& b) { return rank[a.label] < rank[b.label]; });
  return merged;
}

}  // namespace physkit
