#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cxr::eval {

struct ManifestEntry {
  std::string path;
  std::string label;
  std::optional<std::string> split;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  bool operator==(const DatasetManifest&) const = default;
};

/// JSON Lines, one {"path", "label"[, "split"]} object per non-blank line.
/// Throws ManifestError (with the line number) for bad JSON, missing fields,
/// labels outside `class_labels`, or duplicate paths.
DatasetManifest parse_manifest(std::string_view text, const std::vector<std::string>& class_labels);
DatasetManifest load_manifest(const std::filesystem::path& path, const std::vector<std::string>& class_labels);
std::string serialize_manifest(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Position of `label` in `class_labels`; ManifestError if absent.
int label_index(std::string_view label, const std::vector<std::string>& class_labels);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  /// Non-negative, summing to 1. Throws ConfigError.
  void validate() const;
};

struct SplitResult {
  DatasetManifest train;
  DatasetManifest val;
  DatasetManifest test;
  std::vector<std::array<std::int64_t, 3>> counts;  // per class: train, val, test
  std::vector<std::string> warnings;                // e.g. classes without samples
};

/// Per class c (in `class_labels` order): Fisher-Yates over that class's
/// entries in manifest order with RngState(seed ^ c), then
/// train = floor(ratio_train * n), val = floor(ratio_val * n), test = rest.
/// Output entries carry their split tag and are grouped by class.
SplitResult stratified_split(const DatasetManifest& m, const SplitRatios& ratios, std::uint64_t seed,
                             const std::vector<std::string>& class_labels);

/// Train / Val / Test / Total grid with a column per class and a total column.
std::string format_split_table(const SplitResult& r, const std::vector<std::string>& class_labels);

}  // namespace cxr::eval
