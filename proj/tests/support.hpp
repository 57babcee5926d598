#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "cxr/imagecore/image.hpp"
#include "oracles.hpp"

namespace testing_support {

inline cxr::image::GrayImage random_gray(int w, int h, std::uint64_t seed, int lo = 0, int hi = 255) {
  oracle::SplitMix64 rng(seed);
  cxr::image::GrayImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(lo + rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  return img;
}

// Smooth synthetic radiograph-like image: a bright elliptical field with a
// few dim blobs and mild noise.
inline cxr::image::GrayImage synthetic_cxr(int w, int h, std::uint64_t seed) {
  oracle::SplitMix64 rng(seed);
  cxr::image::GrayImage img(w, h);
  const double bx = w * (0.3 + 0.4 * rng.unit());
  const double by = h * (0.3 + 0.4 * rng.unit());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = (x - w / 2.0) / (w * 0.45);
      const double dy = (y - h / 2.0) / (h * 0.48);
      double v = 40.0 + 150.0 * std::max(0.0, 1.0 - dx * dx - dy * dy);
      const double ex = (x - bx) / (w * 0.08);
      const double ey = (y - by) / (h * 0.08);
      v += 50.0 * std::exp(-(ex * ex + ey * ey));
      v += 8.0 * (rng.unit() - 0.5);
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return img;
}

inline oracle::Gray to_oracle(const cxr::image::GrayImage& img) {
  return {img.width, img.height, std::vector<int>(img.pixels.begin(), img.pixels.end())};
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("cxr_test_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  return dir;
}

// Reads <dir>/<name>.schema.json, inlining {"$ref": "<other>"} nodes.
inline nlohmann::json load_schema(const std::filesystem::path& dir, const std::string& name) {
  std::ifstream in(dir / (name + ".schema.json"));
  nlohmann::json s = nlohmann::json::parse(in);
  auto resolve = [&](auto& self, nlohmann::json& node) -> void {
    if (node.is_object() && node.contains("$ref")) {
      node = load_schema(dir, node["$ref"].get<std::string>());
      return;
    }
    if (node.is_structured()) {
      for (auto& child : node) self(self, child);
    }
  };
  resolve(resolve, s);
  return s;
}

// Minimal JSON-schema check covering the subset the golden schemas use:
// type, required, properties, additionalProperties=false, items, enum,
// minimum, maximum, minItems, maxItems, pattern-free strings.
inline std::string schema_violation(const nlohmann::json& v, const nlohmann::json& s, const std::string& where = "$") {
  if (s.contains("type")) {
    const auto want = s["type"];
    auto is = [&](const std::string& t) {
      if (t == "object") return v.is_object();
      if (t == "array") return v.is_array();
      if (t == "string") return v.is_string();
      if (t == "number") return v.is_number();
      if (t == "integer") return v.is_number_integer();
      if (t == "boolean") return v.is_boolean();
      if (t == "null") return v.is_null();
      return false;
    };
    bool ok = false;
    if (want.is_array()) {
      for (const auto& t : want) ok = ok || is(t.get<std::string>());
    } else {
      ok = is(want.get<std::string>());
    }
    if (!ok) return where + ": expected type " + want.dump() + ", got " + v.dump();
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) found = found || e == v;
    if (!found) return where + ": " + v.dump() + " not in enum";
  }
  if (v.is_number()) {
    if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>()) return where + ": below minimum";
    if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>()) return where + ": above maximum";
  }
  if (v.is_object()) {
    for (const auto& r : s.value("required", nlohmann::json::array())) {
      if (!v.contains(r.get<std::string>())) return where + ": missing " + r.get<std::string>();
    }
    const auto props = s.value("properties", nlohmann::json::object());
    for (const auto& [k, item] : v.items()) {
      if (props.contains(k)) {
        auto e = schema_violation(item, props[k], where + "." + k);
        if (!e.empty()) return e;
      } else if (s.contains("additionalProperties")) {
        const auto& ap = s["additionalProperties"];
        if (ap.is_boolean() && !ap.get<bool>()) return where + ": unexpected key " + k;
        if (ap.is_object()) {
          auto e = schema_violation(item, ap, where + "." + k);
          if (!e.empty()) return e;
        }
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) return where + ": too few items";
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) return where + ": too many items";
    if (s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        auto e = schema_violation(v[i], s["items"], where + "[" + std::to_string(i) + "]");
        if (!e.empty()) return e;
      }
    }
  }
  return {};
}

}  // namespace testing_support
