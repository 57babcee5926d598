// Queue bursts of connections instead of dropping them past the default backlog of 5.
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#include "httplib.h"

#include "cxr/service/server.hpp"

namespace cxr::service {
namespace {

void add_cors(httplib::Response& res, const std::string& origin) {
  if (res.has_header("Access-Control-Allow-Origin")) return;
  res.set_header("Access-Control-Allow-Origin", origin);
  res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
  res.set_header("Access-Control-Allow-Headers", "Content-Type");
  res.set_header("Vary", "Origin");
}

void send(httplib::Response& res, const ApiResponse& api) {
  res.status = api.status;
  res.set_content(api.body, "application/json");
}

bool is_json(const httplib::Request& req) {
  const std::string ct = req.get_header_value("Content-Type");
  return ct.starts_with("application/json") || (ct.empty() && !req.body.empty() && req.body.front() == '{');
}

// Builds an ApiRequest from multipart, JSON, or a raw image body.
std::variant<ApiRequest, ApiResponse> to_api_request(const httplib::Request& req) {
  if (req.is_multipart_form_data()) {
    ApiRequest api;
    for (const auto& [name, part] : req.files) {
      if (name == "image") {
        api.image.assign(part.content.begin(), part.content.end());
      } else {
        api.form[name] = part.content;
      }
    }
    return api;
  }
  if (is_json(req)) return Service::parse_json_request(req.body);
  const std::string ct = req.get_header_value("Content-Type");
  if (ct.starts_with("image/") || ct == "application/octet-stream") {
    ApiRequest api;
    api.image.assign(req.body.begin(), req.body.end());
    return api;
  }
  return error_response(415, "unsupported_media_type",
                        "send multipart/form-data, application/json, or an image/* body (got '" + ct + "')");
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  Service& svc = impl_->service;
  const ServiceConfig& cfg = svc.config();
  const std::string origin = cfg.cors_origin;
  const std::size_t image_limit = static_cast<std::size_t>(cfg.max_body_mb) * 1024 * 1024;
  // Base64 inflates uploads by 4/3; leave room for that and form framing.
  srv.set_payload_max_length(image_limit / 3 * 4 + 64 * 1024);
  const int threads = cfg.threads;
  srv.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };

  auto post = [&srv, &svc, origin, image_limit](const std::string& path, auto handler) {
    srv.Post(path, [&svc, origin, image_limit, handler](const httplib::Request& req, httplib::Response& res) {
      auto parsed = to_api_request(req);
      if (auto* err = std::get_if<ApiResponse>(&parsed)) {
        send(res, *err);
      } else if (std::get<ApiRequest>(parsed).image.size() > image_limit) {
        send(res, error_response(413, "payload_too_large", "image exceeds the configured body limit"));
      } else {
        send(res, (svc.*handler)(std::get<ApiRequest>(parsed)));
      }
      add_cors(res, origin);
    });
  };
  post("/v1/classify", &Service::classify);
  post("/v1/explain", &Service::explain);

  srv.Get("/v1/model", [&svc, origin](const httplib::Request&, httplib::Response& res) {
    send(res, svc.model_info());
    add_cors(res, origin);
  });
  srv.Get("/healthz", [&svc, origin](const httplib::Request&, httplib::Response& res) {
    send(res, svc.health());
    add_cors(res, origin);
  });
  srv.Options(".*", [origin](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    add_cors(res, origin);
  });
  srv.set_error_handler([origin](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const std::string code = res.status == 413   ? "payload_too_large"
                               : res.status == 404 ? "not_found"
                               : res.status == 405 ? "method_not_allowed"
                                                   : "http_error";
      send(res, error_response(res.status, code, httplib::status_message(res.status)));
    }
    add_cors(res, origin);
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) return srv.bind_to_any_port(host);
  return srv.bind_to_port(host, port) ? port : -1;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace cxr::service
