#include "cxr/service/server.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "cxr/error.hpp"
#include "cxr/imagecore/codec.hpp"

namespace cxr::service {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kClassifyKeys[] = {"image_b64", "clahe_clip", "clahe_grid"};
constexpr const char* kExplainKeys[] = {"image_b64", "clahe_clip", "clahe_grid", "method",
                                        "layer",     "top_k",      "alpha",      "target"};

// Thrown while reading parameters; carries the HTTP error to return.
struct RequestError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void reject(int status, std::string code, std::string message) {
  throw RequestError{status, std::move(code), std::move(message)};
}

// Uniform view over JSON fields and multipart text fields.
class Params {
 public:
  explicit Params(const ApiRequest& req) : form_(req.form) {
    if (!req.json.empty()) {
      try {
        body_ = json::parse(req.json);
      } catch (const json::exception& e) {
        reject(400, "malformed_body", std::string("request body is not valid JSON: ") + e.what());
      }
      if (!body_.is_object()) reject(400, "malformed_body", "request body must be a JSON object");
    }
  }

  void check_keys(std::span<const char* const> allowed) const {
    auto known = [&](const std::string& k) {
      return std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; });
    };
    if (body_.is_object()) {
      for (const auto& [k, v] : body_.items()) {
        if (!known(k)) reject(400, "unknown_parameter", "unsupported field '" + k + "'");
      }
    }
    for (const auto& [k, v] : form_) {
      if (!known(k)) reject(400, "unknown_parameter", "unsupported field '" + k + "'");
    }
  }

  bool has(const std::string& key) const {
    return (body_.is_object() && body_.contains(key) && !body_.at(key).is_null()) || form_.contains(key);
  }

  std::string text(const std::string& key) const {
    if (body_.is_object() && body_.contains(key)) {
      if (!body_.at(key).is_string()) reject(400, "malformed_body", "'" + key + "' must be a string");
      return body_.at(key).get<std::string>();
    }
    return form_.at(key);
  }

  double number(const std::string& key) const {
    if (body_.is_object() && body_.contains(key)) {
      if (!body_.at(key).is_number()) reject(400, "malformed_body", "'" + key + "' must be a number");
      return body_.at(key).get<double>();
    }
    return parse_double(key, form_.at(key));
  }

  int integer(const std::string& key) const {
    const double v = number(key);
    if (v != static_cast<double>(static_cast<long long>(v)) || std::abs(v) > 1e6) {
      reject(400, "malformed_body", "'" + key + "' must be an integer");
    }
    return static_cast<int>(v);
  }

  std::pair<double, double> pair(const std::string& key) const {
    if (body_.is_object() && body_.contains(key)) {
      const auto& v = body_.at(key);
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        reject(400, "malformed_body", "'" + key + "' must be a two-element number array");
      }
      return {v[0].get<double>(), v[1].get<double>()};
    }
    const std::string& s = form_.at(key);
    const auto sep = s.find_first_of(",x");
    if (sep == std::string::npos) reject(400, "malformed_body", "'" + key + "' must look like \"8,8\"");
    return {parse_double(key, s.substr(0, sep)), parse_double(key, s.substr(sep + 1))};
  }

 private:
  static double parse_double(const std::string& key, const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) reject(400, "malformed_body", "'" + key + "' is not a number");
    return v;
  }

  json body_;
  const std::map<std::string, std::string>& form_;
};

PreprocessSettings read_overrides(const Params& p, const PreprocessSettings& defaults) {
  PreprocessSettings s = defaults;
  if (p.has("clahe_clip")) {
    const double clip = p.number("clahe_clip");
    if (!(clip > 0.0 && clip <= 8.0)) {
      reject(400, "override_out_of_range", "clahe_clip must lie in (0, 8]");
    }
    s.clahe.clip_limit = clip;
  }
  if (p.has("clahe_grid")) {
    const auto [gx, gy] = p.pair("clahe_grid");
    auto valid = [](double v) { return v >= 2 && v <= 16 && v == static_cast<int>(v); };
    if (!valid(gx) || !valid(gy)) {
      reject(400, "override_out_of_range", "clahe_grid entries must be integers in [2, 16]");
    }
    s.clahe.tiles_x = static_cast<int>(gx);
    s.clahe.tiles_y = static_cast<int>(gy);
  }
  return s;
}

image::GrayImage decode_upload(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) reject(400, "malformed_body", "no image supplied (multipart part 'image' or field 'image_b64')");
  try {
    return image::decode_image(bytes);
  } catch (const UnsupportedFormat& e) {
    reject(415, "unsupported_media_type", e.what());
  } catch (const DecodeError& e) {
    reject(400, "malformed_image", e.what());
  }
}

ordered_json preprocessing_echo(const PreprocessSettings& s) {
  ordered_json j;
  j["clahe_clip"] = s.clahe.clip_limit;
  j["clahe_grid"] = {s.clahe.tiles_x, s.clahe.tiles_y};
  j["resize_shorter_side"] = image::kResizeShorterSide;
  j["crop"] = image::kModelInputSize;
  j["crop_policy"] = s.crop == image::CropPolicy::kCenter ? "center" : "full_resize";
  // Echo the single-precision stats at float precision, not their double expansion.
  auto floats = [](const std::array<float, 3>& v) {
    ordered_json a = ordered_json::array();
    for (float f : v) a.push_back(std::stod(std::to_string(f)));
    return a;
  };
  j["mean"] = floats(s.stats.mean);
  j["std"] = floats(s.stats.std);
  return j;
}

ordered_json classification_json(const LoadedModel& m, const Classification& c, const PreprocessSettings& s) {
  ordered_json j;
  j["model"] = m.graph.architecture;
  ordered_json probs = ordered_json::object();
  for (std::size_t i = 0; i < c.probabilities.size(); ++i) probs[m.graph.class_labels[i]] = c.probabilities[i];
  j["probabilities"] = std::move(probs);
  j["predicted"] = m.graph.class_labels[c.predicted];
  j["preprocessing"] = preprocessing_echo(s);
  return j;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string classify_response(const LoadedModel& m, const Classification& c, const PreprocessSettings& s,
                              double latency_ms) {
  auto j = classification_json(m, c, s);
  j["latency_ms"] = latency_ms;
  return j.dump();
}

namespace {

ApiResponse ok(const ordered_json& j) { return {200, j.dump()}; }

template <typename Fn>
ApiResponse guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const RequestError& e) {
    return error_response(e.status, e.code, e.message);
  } catch (const GridError& e) {
    return error_response(400, "image_too_small", e.what());
  } catch (const std::exception& e) {
    std::cerr << "error: request failed: " << e.what() << '\n';
    return error_response(500, "internal_error", e.what());
  }
}

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return fallback;
  char* end = nullptr;
  const long parsed = std::strtol(v, &end, 10);
  if (*end != '\0') throw ConfigError(std::string(name) + " is not an integer: " + v);
  return static_cast<int>(parsed);
}

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError("port must lie in [0, 65535]");
  if (max_body_mb < 1) throw ConfigError("max_body_mb must be at least 1");
  if (scorecam_batch < 1) throw ConfigError("scorecam_batch must be at least 1");
  if (explain_concurrency < 1) throw ConfigError("explain_concurrency must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  preprocessing.clahe.validate();
  preprocessing.stats.validate();
}

ServiceConfig config_from_env(ServiceConfig base) {
  if (const char* v = std::getenv("CXR_MODEL_PATH"); v != nullptr && *v != '\0') base.model_path = v;
  if (const char* v = std::getenv("CXR_CORS_ORIGIN"); v != nullptr && *v != '\0') base.cors_origin = v;
  base.port = env_int("CXR_PORT", base.port);
  base.max_body_mb = env_int("CXR_MAX_BODY_MB", base.max_body_mb);
  base.scorecam_batch = env_int("CXR_SCORECAM_BATCH", base.scorecam_batch);
  base.explain_concurrency = env_int("CXR_EXPLAIN_CONCURRENCY", base.explain_concurrency);
  base.threads = env_int("CXR_THREADS", base.threads);
  return base;
}

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  ordered_json j;
  j["error"] = ordered_json{{"code", code}, {"message", message}};
  return {status, j.dump()};
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.starts_with("data:")) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw Error("data URL without a comma");
    text.remove_prefix(comma + 1);
  }
  std::string clean;
  clean.reserve(text.size());
  for (char ch : text) {
    if (ch != '\n' && ch != '\r' && ch != ' ' && ch != '\t') clean.push_back(ch);
  }
  if (clean.size() % 4 != 0) throw Error("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw Error("invalid base64");
  std::size_t padding = 0;
  if (!clean.empty() && clean.back() == '=') ++padding;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

Service::Service(ServiceConfig config) : config_(std::move(config)), started_(std::chrono::steady_clock::now()) {
  config_.validate();
  explain_slots_ = std::make_unique<std::counting_semaphore<>>(config_.explain_concurrency);
  if (config_.model_path.empty()) {
    load_error_ = "no model path configured (CXR_MODEL_PATH)";
  } else {
    try {
      model_ = load_model(config_.model_path);
    } catch (const std::exception& e) {
      load_error_ = e.what();
    }
  }
  if (!model_) std::cerr << "warning: model not loaded: " << load_error_ << '\n';
}

Service::Service(ServiceConfig config, std::shared_ptr<const LoadedModel> model)
    : config_(std::move(config)), model_(std::move(model)), started_(std::chrono::steady_clock::now()) {
  config_.validate();
  explain_slots_ = std::make_unique<std::counting_semaphore<>>(config_.explain_concurrency);
  if (!model_) load_error_ = "no model supplied";
}

std::variant<ApiRequest, ApiResponse> Service::parse_json_request(const std::string& body) {
  ApiRequest req;
  req.json = body;
  try {
    const auto j = json::parse(body);
    if (!j.is_object()) return error_response(400, "malformed_body", "request body must be a JSON object");
    if (j.contains("image_b64")) {
      if (!j.at("image_b64").is_string()) return error_response(400, "malformed_body", "'image_b64' must be a string");
      req.image = base64_decode(j.at("image_b64").get<std::string>());
    }
  } catch (const json::exception& e) {
    return error_response(400, "malformed_body", std::string("request body is not valid JSON: ") + e.what());
  } catch (const Error& e) {
    return error_response(400, "malformed_body", std::string("image_b64: ") + e.what());
  }
  return req;
}

ApiResponse Service::classify(const ApiRequest& req) const {
  const auto start = std::chrono::steady_clock::now();
  if (!model_) return error_response(503, "model_not_loaded", load_error_);
  return guarded([&] {
    const Params p(req);
    p.check_keys(kClassifyKeys);
    const auto settings = read_overrides(p, config_.preprocessing);
    const auto img = decode_upload(req.image);
    const auto c = service::classify(*model_, img, settings);
    auto j = classification_json(*model_, c, settings);
    j["latency_ms"] = elapsed_ms(start);
    return ok(j);
  });
}

ApiResponse Service::explain(const ApiRequest& req) const {
  const auto start = std::chrono::steady_clock::now();
  if (!model_) return error_response(503, "model_not_loaded", load_error_);
  return guarded([&] {
    const Params p(req);
    p.check_keys(kExplainKeys);
    const auto settings = read_overrides(p, config_.preprocessing);

    ExplainOptions opt;
    opt.scorecam_batch = config_.scorecam_batch;
    if (p.has("method")) {
      try {
        opt.method = explain::parse_cam_method(p.text("method"));
      } catch (const UnsupportedMethod& e) {
        reject(400, "unsupported_method", e.what());
      }
    }
    if (p.has("layer")) opt.layer = p.text("layer");
    const std::string layer = opt.layer.empty() ? model_->default_cam_layer : opt.layer;
    const nn::GraphNode* node = model_->graph.find_node(layer);
    if (node == nullptr) reject(400, "layer_not_found", "no layer '" + layer + "' in " + model_->graph.architecture);
    if (opt.method == explain::CamMethod::kGapHead && layer != model_->default_cam_layer) {
      reject(400, "invalid_parameter", "gap_head applies only to layer '" + model_->default_cam_layer + "'");
    }
    if (p.has("top_k")) {
      if (opt.method != explain::CamMethod::kScoreCam) reject(400, "invalid_parameter", "top_k applies to score_cam only");
      const int channels = model_->shapes.at(layer)[1];
      const int k = p.integer("top_k");
      if (k < 1 || k > channels) {
        reject(400, "invalid_parameter", "top_k must lie in [1, " + std::to_string(channels) + "]");
      }
      opt.top_k = k;
    }
    if (p.has("alpha")) {
      opt.alpha = p.number("alpha");
      if (!(opt.alpha >= 0.0 && opt.alpha <= 1.0)) reject(400, "invalid_parameter", "alpha must lie in [0, 1]");
    }
    if (p.has("target")) {
      const std::string target = p.text("target");
      const auto& labels = model_->graph.class_labels;
      const auto it = std::find(labels.begin(), labels.end(), target);
      if (it == labels.end()) reject(400, "invalid_parameter", "unknown target label '" + target + "'");
      opt.target_class = static_cast<int>(it - labels.begin());
    }
    const auto img = decode_upload(req.image);

    explain_slots_->acquire();
    Explanation e;
    try {
      e = explain_image(*model_, img, settings, opt);
    } catch (...) {
      explain_slots_->release();
      throw;
    }
    explain_slots_->release();

    auto j = classification_json(*model_, e.classification, settings);
    j["target"] = model_->graph.class_labels[e.target_class];
    ordered_json cam;
    cam["method"] = explain::to_string(opt.method);
    cam["layer"] = e.layer;
    cam["top_k"] = opt.top_k ? ordered_json(*opt.top_k) : ordered_json(nullptr);
    cam["alpha"] = opt.alpha;
    j["cam"] = std::move(cam);
    j["heatmap_png"] = base64_encode(image::encode_png(explain::heatmap_to_gray(e.heatmap)));
    j["overlay_png"] = base64_encode(image::encode_png(e.overlay));
    j["latency_ms"] = elapsed_ms(start);
    return ok(j);
  });
}

ApiResponse Service::model_info() const {
  if (!model_) return error_response(503, "model_not_loaded", load_error_);
  ordered_json j;
  j["architecture"] = model_->graph.architecture;
  j["class_labels"] = model_->graph.class_labels;
  j["parameter_count"] = model_->parameter_count;
  j["flops"] = model_->flops;
  j["weight_file_digest"] = model_->weight_file_digest;
  return ok(j);
}

ApiResponse Service::health() const {
  ordered_json j;
  j["status"] = model_ ? "ok" : "degraded";
  j["uptime_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  if (!model_) j["reason"] = load_error_;
  return {model_ ? 200 : 503, j.dump()};
}

}  // namespace cxr::service
