#include "cxr/cli/config.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <string>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "cxr/error.hpp"

namespace cxr::cli {
namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

void reject_unknown(const toml::table& t, const std::string& section, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : t) {
    const std::string key(k.str());
    if (!allowed.contains(key)) bad(section.empty() ? key : section + "." + key, "unknown key");
  }
}

const toml::table* section(const toml::table& root, const std::string& name) {
  const toml::node* n = root.get(name);
  if (n == nullptr) return nullptr;
  if (!n->is_table()) bad(name, "expected a table");
  return n->as_table();
}

double number(const toml::table& t, const std::string& sec, const std::string& key, double fallback) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return fallback;
  if (auto v = n->value<double>()) return *v;
  bad(sec + "." + key, "expected a number");
}

int integer(const toml::table& t, const std::string& sec, const std::string& key, int fallback) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return fallback;
  if (auto v = n->value_exact<std::int64_t>()) return static_cast<int>(*v);
  bad(sec + "." + key, "expected an integer");
}

std::string text(const toml::table& t, const std::string& sec, const std::string& key, const std::string& fallback) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return fallback;
  if (auto v = n->value_exact<std::string>()) return *v;
  bad(sec + "." + key, "expected a string");
}

std::vector<double> numbers(const toml::table& t, const std::string& sec, const std::string& key, std::size_t count) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return {};
  const toml::array* a = n->as_array();
  if (a == nullptr || a->size() != count) bad(sec + "." + key, "expected an array of " + std::to_string(count) + " numbers");
  std::vector<double> out;
  for (const auto& e : *a) {
    auto v = e.value<double>();
    if (!v) bad(sec + "." + key, "expected numbers");
    out.push_back(*v);
  }
  return out;
}

augment::Interval interval(const toml::table& t, const std::string& sec, const std::string& key,
                           augment::Interval fallback) {
  const auto v = numbers(t, sec, key, 2);
  return v.empty() ? fallback : augment::Interval{v[0], v[1]};
}

}  // namespace

void CliConfig::validate() const {
  clahe.validate();
  stats.validate();
  augment.validate();
  service.validate();
}

CliConfig parse_config(std::string_view toml_text, CliConfig c) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("config is not valid TOML: ") + std::string(e.description()));
  }
  reject_unknown(root, "", {"clahe", "normalization", "augment", "service"});

  if (const auto* t = section(root, "clahe")) {
    reject_unknown(*t, "clahe", {"clip_limit", "grid"});
    c.clahe.clip_limit = number(*t, "clahe", "clip_limit", c.clahe.clip_limit);
    if (const auto g = numbers(*t, "clahe", "grid", 2); !g.empty()) {
      if (g[0] != static_cast<int>(g[0]) || g[1] != static_cast<int>(g[1])) bad("clahe.grid", "expected integers");
      c.clahe.tiles_x = static_cast<int>(g[0]);
      c.clahe.tiles_y = static_cast<int>(g[1]);
    }
  }
  if (const auto* t = section(root, "normalization")) {
    reject_unknown(*t, "normalization", {"mean", "std"});
    if (const auto m = numbers(*t, "normalization", "mean", 3); !m.empty()) {
      for (int i = 0; i < 3; ++i) c.stats.mean[i] = static_cast<float>(m[i]);
    }
    if (const auto s = numbers(*t, "normalization", "std", 3); !s.empty()) {
      for (int i = 0; i < 3; ++i) c.stats.std[i] = static_cast<float>(s[i]);
    }
  }
  if (const auto* t = section(root, "augment")) {
    reject_unknown(*t, "augment", {"crop_area_ratio", "aspect_ratio", "out_size", "perspective_distortion",
                                   "perspective_prob", "rotation_degrees"});
    auto& a = c.augment;
    a.crop_area_ratio = interval(*t, "augment", "crop_area_ratio", a.crop_area_ratio);
    a.aspect_ratio = interval(*t, "augment", "aspect_ratio", a.aspect_ratio);
    a.out_size = integer(*t, "augment", "out_size", a.out_size);
    a.perspective_distortion = number(*t, "augment", "perspective_distortion", a.perspective_distortion);
    a.perspective_prob = number(*t, "augment", "perspective_prob", a.perspective_prob);
    a.rotation_degrees = interval(*t, "augment", "rotation_degrees", a.rotation_degrees);
  }
  if (const auto* t = section(root, "service")) {
    reject_unknown(*t, "service", {"model_path", "host", "port", "max_body_mb", "scorecam_batch",
                                   "explain_concurrency", "threads", "cors_origin"});
    auto& s = c.service;
    s.model_path = text(*t, "service", "model_path", s.model_path);
    s.host = text(*t, "service", "host", s.host);
    s.port = integer(*t, "service", "port", s.port);
    s.max_body_mb = integer(*t, "service", "max_body_mb", s.max_body_mb);
    s.scorecam_batch = integer(*t, "service", "scorecam_batch", s.scorecam_batch);
    s.explain_concurrency = integer(*t, "service", "explain_concurrency", s.explain_concurrency);
    s.threads = integer(*t, "service", "threads", s.threads);
    s.cors_origin = text(*t, "service", "cors_origin", s.cors_origin);
  }
  c.service.preprocessing.clahe = c.clahe;
  c.service.preprocessing.stats = c.stats;
  c.validate();
  return c;
}

CliConfig load_config(const std::filesystem::path& path, CliConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_config(text, std::move(base));
}

}  // namespace cxr::cli
