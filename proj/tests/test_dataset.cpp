#include <gtest/gtest.h>

#include <set>

#include "cxr/error.hpp"
#include "cxr/evalmetrics/dataset.hpp"
#include "cxr/models/models.hpp"
#include "support.hpp"

using namespace cxr;
using namespace cxr::eval;

namespace {

const std::vector<std::string>& labels() { return models::default_class_labels(); }

DatasetManifest manifest_with(const std::vector<int>& sizes) {
  DatasetManifest m;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    for (int i = 0; i < sizes[c]; ++i) {
      m.entries.push_back({labels()[c] + "/img" + std::to_string(i) + ".png", labels()[c], std::nullopt});
    }
  }
  return m;
}

}  // namespace

TEST(Split, ReproducesSourceTable) {
  const auto m = manifest_with({838, 858, 816, 833});
  const std::vector<std::array<std::int64_t, 3>> want{{670, 83, 85}, {686, 85, 87}, {652, 81, 83}, {666, 83, 84}};
  for (std::uint64_t seed : {0ULL, 7ULL, 123456789ULL}) {
    const auto r = stratified_split(m, {}, seed, labels());
    EXPECT_EQ(r.counts, want) << seed;
    EXPECT_EQ(r.train.entries.size(), 2674u);
    EXPECT_EQ(r.val.entries.size(), 332u);
    EXPECT_EQ(r.test.entries.size(), 339u);
    EXPECT_TRUE(r.warnings.empty());
  }
}

TEST(Split, PartitionInvariant) {
  const auto m = manifest_with({37, 5, 0, 112});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = stratified_split(m, {}, seed, labels());
    std::multiset<std::string> all;
    for (const auto* part : {&r.train, &r.val, &r.test}) {
      for (const auto& e : part->entries) all.insert(e.path);
    }
    std::multiset<std::string> input;
    for (const auto& e : m.entries) input.insert(e.path);
    EXPECT_EQ(all, input);
    EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), all.size());
    for (const auto& e : r.val.entries) EXPECT_EQ(e.split, "val");
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("virus"), std::string::npos);
  }
}

TEST(Split, MembershipDependsOnSeed) {
  const auto m = manifest_with({50, 50, 50, 50});
  const auto a = stratified_split(m, {}, 1, labels());
  const auto b = stratified_split(m, {}, 2, labels());
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_NE(a.test, b.test);
  EXPECT_EQ(stratified_split(m, {}, 1, labels()).test, a.test);
}

TEST(Split, FloorAllocation) {
  const auto r = stratified_split(manifest_with({9, 1, 19, 10}), {}, 3, labels());
  EXPECT_EQ(r.counts[0], (std::array<std::int64_t, 3>{7, 0, 2}));
  EXPECT_EQ(r.counts[1], (std::array<std::int64_t, 3>{0, 0, 1}));
  EXPECT_EQ(r.counts[2], (std::array<std::int64_t, 3>{15, 1, 3}));
  EXPECT_EQ(r.counts[3], (std::array<std::int64_t, 3>{8, 1, 1}));
}

TEST(Split, RatiosValidated) {
  EXPECT_THROW((SplitRatios{0.5, 0.5, 0.5}.validate()), ConfigError);
  EXPECT_THROW((SplitRatios{1.2, -0.1, -0.1}.validate()), ConfigError);
  EXPECT_NO_THROW((SplitRatios{0.7, 0.15, 0.15}.validate()));
}

TEST(Split, TableText) {
  const auto r = stratified_split(manifest_with({838, 858, 816, 833}), {}, 0, labels());
  const auto t = format_split_table(r, labels());
  for (const char* cell : {"Train", "Val", "Test", "Total", "670", "2674", "332", "339", "3345"}) {
    EXPECT_NE(t.find(cell), std::string::npos) << cell << "\n" << t;
  }
}

TEST(Manifest, ParseAndRoundTrip) {
  const std::string text =
      "{\"path\": \"a.png\", \"label\": \"virus\"}\n"
      "\n"
      "{\"path\": \"b.png\", \"label\": \"normal\", \"split\": \"test\"}\n";
  const auto m = parse_manifest(text, labels());
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].label, "virus");
  EXPECT_FALSE(m.entries[0].split.has_value());
  EXPECT_EQ(m.entries[1].split, "test");
  EXPECT_EQ(parse_manifest(serialize_manifest(m), labels()), m);

  const auto dir = testing_support::temp_dir("manifest");
  save_manifest(m, dir / "m.jsonl");
  EXPECT_EQ(load_manifest(dir / "m.jsonl", labels()), m);
  std::filesystem::remove_all(dir);
}

TEST(Manifest, Errors) {
  auto expect_line = [](const std::string& text, const std::string& line) {
    try {
      parse_manifest(text, labels());
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ManifestError& e) {
      EXPECT_NE(std::string(e.what()).find(line), std::string::npos) << e.what();
    }
  };
  expect_line("{\"path\": \"a\", \"label\": \"normal\"}\n{bad", "line 2");
  expect_line("{\"path\": \"a\"}", "line 1");
  expect_line("{\"path\": \"a\", \"label\": \"covid\"}", "line 1");
  expect_line("{\"path\": \"a\", \"label\": \"normal\"}\n{\"path\": \"a\", \"label\": \"virus\"}", "line 2");
  EXPECT_THROW(load_manifest("/nonexistent/m.jsonl", labels()), IoError);
  EXPECT_EQ(label_index("mycoplasma", labels()), 3);
  EXPECT_THROW(label_index("covid", labels()), ManifestError);
}
