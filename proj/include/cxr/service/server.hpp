#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cxr/service/engine.hpp"

namespace cxr::service {

struct ServiceConfig {
  std::string model_path;
  std::string host = "0.0.0.0";
  int port = 8080;
  int max_body_mb = 20;
  int scorecam_batch = 16;
  int explain_concurrency = 2;  // simultaneous explain computations
  int threads = 8;              // HTTP worker threads
  std::string cors_origin = "*";
  PreprocessSettings preprocessing;

  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

/// Applies CXR_MODEL_PATH, CXR_PORT, CXR_MAX_BODY_MB, CXR_SCORECAM_BATCH,
/// CXR_EXPLAIN_CONCURRENCY, CXR_THREADS and CXR_CORS_ORIGIN on top of `base`.
ServiceConfig config_from_env(ServiceConfig base);

/// A decoded API call: the encoded image plus named parameters, from either
/// a JSON body ("image_b64" + fields) or a multipart form (part "image" +
/// text fields).
struct ApiRequest {
  std::vector<std::uint8_t> image;
  std::map<std::string, std::string> form;  // multipart text fields
  std::string json;                          // raw JSON body, when JSON
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Error body {"error": {"code", "message"}}.
ApiResponse error_response(int status, const std::string& code, const std::string& message);

/// ClassifyResponse JSON: model, probabilities, predicted, preprocessing,
/// latency_ms.
std::string classify_response(const LoadedModel& m, const Classification& c, const PreprocessSettings& s,
                              double latency_ms);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Accepts an optional "data:...;base64," prefix. Throws Error on bad input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Endpoint logic, independent of the HTTP library. Thread-safe: the model is
/// immutable and only the explain limiter is shared.
class Service {
 public:
  /// Loads config.model_path; a failure leaves the service degraded.
  explicit Service(ServiceConfig config);
  /// Serves an already loaded model.
  Service(ServiceConfig config, std::shared_ptr<const LoadedModel> model);

  bool ready() const { return model_ != nullptr; }
  const ServiceConfig& config() const { return config_; }
  const std::string& load_error() const { return load_error_; }

  ApiResponse classify(const ApiRequest& req) const;
  ApiResponse explain(const ApiRequest& req) const;
  ApiResponse model_info() const;
  ApiResponse health() const;

  /// Parses a JSON body into an ApiRequest; ApiResponse on failure.
  static std::variant<ApiRequest, ApiResponse> parse_json_request(const std::string& body);

 private:
  ServiceConfig config_;
  std::shared_ptr<const LoadedModel> model_;
  std::string load_error_;
  std::chrono::steady_clock::time_point started_;
  std::unique_ptr<std::counting_semaphore<>> explain_slots_;
};

/// httplib front end: routes, CORS, body limit.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();
  bool running() const;
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cxr::service
