#include "cxr/nn/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "cxr/error.hpp"

namespace cxr::nn {
namespace {

constexpr char kMagic[4] = {'C', 'X', 'R', 'W'};
constexpr std::size_t kPreambleSize = 9;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

}  // namespace

void WeightStore::add(std::string name, Parameter tensor) {
  if (element_count(tensor.shape) != tensor.values.size()) {
    throw ShapeError("tensor '" + name + "': value count does not match its shape");
  }
  if (index_.contains(name)) throw FormatError("duplicate tensor '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(tensor)});
}

const Parameter* WeightStore::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &entries_[it->second].tensor;
}

const Parameter& WeightStore::at(std::string_view name) const {
  const Parameter* p = find(name);
  if (p == nullptr) throw MissingWeight("weight store has no tensor '" + std::string(name) + "'");
  return *p;
}

Parameter& WeightStore::mutable_at(std::string_view name) {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw MissingWeight("weight store has no tensor '" + std::string(name) + "'");
  return entries_[it->second].tensor;
}

bool WeightStore::operator==(const WeightStore& other) const {
  return architecture == other.architecture && class_labels == other.class_labels &&
         format_version == other.format_version && entries_ == other.entries_;
}

std::vector<std::uint8_t> serialize_weights(const WeightStore& store) {
  nlohmann::ordered_json header;
  header["architecture"] = store.architecture;
  header["class_labels"] = store.class_labels;
  header["tensors"] = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& e : store.entries()) {
    nlohmann::ordered_json t;
    t["name"] = e.name;
    t["shape"] = e.tensor.shape;
    t["offset"] = offset;
    t["len"] = e.tensor.values.size();
    header["tensors"].push_back(std::move(t));
    offset += e.tensor.values.size();
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPreambleSize + text.size() + offset * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kWeightFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& e : store.entries()) {
    for (float f : e.tensor.values) put_f32(out, f);
  }
  return out;
}

WeightStore parse_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreambleSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a CXRW file (bad magic)");
  }
  if (bytes[4] != kWeightFormatVersion) {
    throw FormatError("unsupported CXRW version " + std::to_string(bytes[4]));
  }
  const std::uint32_t header_len = get_u32(bytes.data() + 5);
  if (header_len > bytes.size() - kPreambleSize) throw IntegrityError("CXRW header length exceeds file size");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPreambleSize, bytes.begin() + kPreambleSize + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("CXRW header is not valid JSON: ") + e.what());
  }

  const std::size_t blob_bytes = bytes.size() - kPreambleSize - header_len;
  if (blob_bytes % 4 != 0) throw IntegrityError("CXRW blob is not a whole number of float32 values");
  const std::size_t blob_len = blob_bytes / 4;
  const std::uint8_t* blob = bytes.data() + kPreambleSize + header_len;

  WeightStore store;
  store.format_version = bytes[4];
  struct Extent {
    std::size_t offset;
    std::size_t len;
  };
  std::vector<Extent> extents;
  try {
    store.architecture = header.at("architecture").get<std::string>();
    store.class_labels = header.at("class_labels").get<std::vector<std::string>>();
    for (const auto& t : header.at("tensors")) {
      auto name = t.at("name").get<std::string>();
      auto shape = t.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto len = t.at("len").get<std::uint64_t>();
      for (auto d : shape) {
        if (d < 1) throw FormatError("tensor '" + name + "' has a non-positive dimension");
      }
      if (element_count(shape) != len) {
        throw IntegrityError("tensor '" + name + "': len " + std::to_string(len) + " disagrees with its shape");
      }
      if (offset > blob_len || len > blob_len - offset) {
        throw IntegrityError("tensor '" + name + "' extends past the end of the blob");
      }
      Parameter p;
      p.shape = std::move(shape);
      p.values.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        const float v = std::bit_cast<float>(get_u32(blob + 4 * (offset + i)));
        if (!std::isfinite(v)) throw IntegrityError("tensor '" + name + "' contains a non-finite value");
        p.values[i] = v;
      }
      extents.push_back({offset, len});
      store.add(std::move(name), std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("CXRW header is malformed: ") + e.what());
  }

  std::sort(extents.begin(), extents.end(), [](const Extent& a, const Extent& b) { return a.offset < b.offset; });
  std::size_t cursor = 0;
  for (const auto& e : extents) {
    if (e.offset != cursor) throw IntegrityError("CXRW tensors overlap or leave gaps in the blob");
    cursor += e.len;
  }
  if (cursor != blob_len) throw IntegrityError("CXRW blob has trailing data not covered by any tensor");
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_weights(bytes);
}

void validate_weights(const ModelGraph& g, const WeightStore& w) {
  for (const auto& d : g.weights) {
    const Parameter* p = w.find(d.name);
    if (p == nullptr) throw MissingWeight("weight store has no tensor '" + d.name + "'");
    if (p->shape != d.shape) throw ShapeError("tensor '" + d.name + "' has the wrong shape");
  }
}

std::int64_t count_params(const ModelGraph& g, const WeightStore& w) {
  validate_weights(g, w);
  std::int64_t total = 0;
  for (const auto& d : g.weights) {
    if (d.trainable()) total += static_cast<std::int64_t>(w.at(d.name).values.size());
  }
  return total;
}

}  // namespace cxr::nn
