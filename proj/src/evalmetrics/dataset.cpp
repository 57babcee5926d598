#include "cxr/evalmetrics/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "cxr/augment/rng.hpp"
#include "cxr/error.hpp"

namespace cxr::eval {

int label_index(std::string_view label, const std::vector<std::string>& class_labels) {
  const auto it = std::find(class_labels.begin(), class_labels.end(), label);
  if (it == class_labels.end()) throw ManifestError("unknown label '" + std::string(label) + "'");
  return static_cast<int>(it - class_labels.begin());
}

DatasetManifest parse_manifest(std::string_view text, const std::vector<std::string>& class_labels) {
  DatasetManifest m;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    ManifestEntry e;
    try {
      const auto j = nlohmann::json::parse(line);
      e.path = j.at("path").get<std::string>();
      e.label = j.at("label").get<std::string>();
      if (j.contains("split")) e.split = j.at("split").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw ManifestError(where + ex.what());
    }
    if (e.path.empty()) throw ManifestError(where + "empty path");
    try {
      label_index(e.label, class_labels);
    } catch (const ManifestError& ex) {
      throw ManifestError(where + ex.what());
    }
    if (!seen.insert(e.path).second) throw ManifestError(where + "duplicate path '" + e.path + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path, const std::vector<std::string>& class_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_manifest(text, class_labels);
}

std::string serialize_manifest(const DatasetManifest& m) {
  std::string out;
  for (const auto& e : m.entries) {
    nlohmann::ordered_json j;
    j["path"] = e.path;
    j["label"] = e.label;
    if (e.split) j["split"] = *e.split;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_manifest(m);
  if (!out) throw IoError("short write to " + path.string());
}

void SplitRatios::validate() const {
  if (!(train >= 0.0 && val >= 0.0 && test >= 0.0) || std::fabs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
}

SplitResult stratified_split(const DatasetManifest& m, const SplitRatios& ratios, std::uint64_t seed,
                             const std::vector<std::string>& class_labels) {
  ratios.validate();
  const int classes = static_cast<int>(class_labels.size());
  std::vector<std::vector<const ManifestEntry*>> by_class(classes);
  std::unordered_set<std::string_view> seen;
  for (const auto& e : m.entries) {
    if (!seen.insert(e.path).second) throw ManifestError("duplicate path '" + e.path + "'");
    by_class[label_index(e.label, class_labels)].push_back(&e);
  }

  SplitResult r;
  for (int c = 0; c < classes; ++c) {
    auto& members = by_class[c];
    const std::size_t n = members.size();
    if (n == 0) r.warnings.push_back("class '" + class_labels[c] + "' has no samples");
    augment::RngState rng(seed ^ static_cast<std::uint64_t>(c));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.next_below(i);
      std::swap(members[i - 1], members[j]);
    }
    // The epsilon keeps products such as 0.1 * 830 from landing a hair below
    // an integer.
    const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(ratios.val * n + 1e-9)));
    r.counts.push_back({static_cast<std::int64_t>(n_train), static_cast<std::int64_t>(n_val),
                        static_cast<std::int64_t>(n - n_train - n_val)});
    for (std::size_t i = 0; i < n; ++i) {
      ManifestEntry e = *members[i];
      if (i < n_train) {
        e.split = "train";
        r.train.entries.push_back(std::move(e));
      } else if (i < n_train + n_val) {
        e.split = "val";
        r.val.entries.push_back(std::move(e));
      } else {
        e.split = "test";
        r.test.entries.push_back(std::move(e));
      }
    }
  }
  return r;
}

std::string format_split_table(const SplitResult& r, const std::vector<std::string>& class_labels) {
  std::ostringstream out;
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-8s", "");
  out << cell;
  for (const auto& l : class_labels) {
    std::snprintf(cell, sizeof cell, " %10s", l.c_str());
    out << cell;
  }
  std::snprintf(cell, sizeof cell, " %10s\n", "Total");
  out << cell;
  const char* rows[] = {"Train", "Val", "Test", "Total"};
  for (int row = 0; row < 4; ++row) {
    std::snprintf(cell, sizeof cell, "%-8s", rows[row]);
    out << cell;
    std::int64_t total = 0;
    for (const auto& c : r.counts) {
      const std::int64_t v = row < 3 ? c[row] : c[0] + c[1] + c[2];
      total += v;
      std::snprintf(cell, sizeof cell, " %10lld", static_cast<long long>(v));
      out << cell;
    }
    std::snprintf(cell, sizeof cell, " %10lld\n", static_cast<long long>(total));
    out << cell;
  }
  return out.str();
}

}  // namespace cxr::eval
