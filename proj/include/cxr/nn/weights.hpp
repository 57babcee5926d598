#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cxr/nn/graph.hpp"

namespace cxr::nn {

struct Parameter {
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  bool operator==(const Parameter&) const = default;
};

/// Named tensors plus model metadata, in insertion order.
class WeightStore {
 public:
  struct Entry {
    std::string name;
    Parameter tensor;
    bool operator==(const Entry&) const = default;
  };

  std::string architecture;
  std::vector<std::string> class_labels;
  int format_version = 1;

  void add(std::string name, Parameter tensor);
  const Parameter* find(std::string_view name) const;
  /// Throws MissingWeight.
  const Parameter& at(std::string_view name) const;
  Parameter& mutable_at(std::string_view name);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const WeightStore& other) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// CXRW container:
//   bytes 0-3  "CXRW"
//   byte  4    version (1)
//   bytes 5-8  u32 little-endian length J of the JSON header
//   J bytes    {"architecture", "class_labels", "tensors": [{name, shape, offset, len}]}
//   blob       little-endian float32 values; offset/len count elements
inline constexpr std::uint8_t kWeightFormatVersion = 1;

std::vector<std::uint8_t> serialize_weights(const WeightStore& store);
/// Throws FormatError (magic, version, header JSON) or IntegrityError
/// (offset/length disagreement with the blob, non-finite values).
WeightStore parse_weights(std::span<const std::uint8_t> bytes);

void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

/// Every declared tensor exists with the declared shape. Throws MissingWeight
/// or ShapeError.
void validate_weights(const ModelGraph& g, const WeightStore& w);

/// Trainable parameter count after checking `w` against `g`.
std::int64_t count_params(const ModelGraph& g, const WeightStore& w);

}  // namespace cxr::nn
