#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cxr/cli/cli.hpp"
#include "cxr/evalmetrics/dataset.hpp"
#include "cxr/evalmetrics/metrics.hpp"
#include "cxr/imagecore/codec.hpp"
#include "cxr/models/models.hpp"
#include "cxr/nn/weights.hpp"
#include "cxr/service/engine.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace cxr;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result cxr_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = testing_support::temp_dir("cli");
    model = dir / "tiny.cxrw";
    image = dir / "cxr.png";
    ASSERT_EQ(cxr_run({"fixture", "--arch", "tiny_cnn", "--seed", "7", "-o", model.string()}).code, cli::kExitOk);
    image::write_file(image, image::encode_png(testing_support::synthetic_cxr(300, 260, 5)));
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path dir, model, image;
};

}  // namespace

TEST_F(CliTest, FixtureIsDeterministic) {
  const auto again = dir / "again.cxrw", other = dir / "other.cxrw";
  ASSERT_EQ(cxr_run({"fixture", "--arch", "tiny_cnn", "--seed", "7", "-o", again.string()}).code, 0);
  ASSERT_EQ(cxr_run({"fixture", "--arch", "tiny_cnn", "--seed", "8", "-o", other.string()}).code, 0);
  EXPECT_EQ(image::read_file(model), image::read_file(again));
  EXPECT_NE(image::read_file(model), image::read_file(other));
  const auto w = nn::load_weights(model);
  EXPECT_EQ(w.architecture, "tiny_cnn");
  EXPECT_EQ(w, models::random_weights(models::build_tiny_cnn(4), 7));
}

TEST_F(CliTest, ClassifyJsonMatchesEngine) {
  const auto r = cxr_run({"classify", "-m", model.string(), image.string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  const auto m = service::load_model(model);
  const auto c = service::classify(*m, image::decode_image(image::read_file(image)), {});
  for (std::size_t i = 0; i < c.probabilities.size(); ++i) {
    EXPECT_EQ(j["probabilities"][m->graph.class_labels[i]].get<double>(), c.probabilities[i]);
  }
  EXPECT_EQ(j["predicted"], m->graph.class_labels[c.predicted]);

  const auto plain = cxr_run({"classify", "-m", model.string(), image.string()});
  ASSERT_EQ(plain.code, 0);
  EXPECT_NE(plain.out.find("predicted: " + m->graph.class_labels[c.predicted]), std::string::npos) << plain.out;
}

TEST_F(CliTest, ConfigFileLayers) {
  const auto cfg = dir / "cxr.toml";
  std::ofstream(cfg) << "[clahe]\nclip_limit = 3.0\ngrid = [4, 4]\n";
  const auto r = cxr_run({"--config", cfg.string(), "classify", "-m", model.string(), image.string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pre = json::parse(r.out)["preprocessing"];
  EXPECT_EQ(pre["clahe_clip"], 3.0);
  EXPECT_EQ(pre["clahe_grid"], json({4, 4}));

  // Flags win over the file.
  const auto f = cxr_run({"--config", cfg.string(), "classify", "-m", model.string(), image.string(), "--json",
                          "--clahe-grid", "2,3"});
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_EQ(json::parse(f.out)["preprocessing"]["clahe_grid"], json({2, 3}));

  std::ofstream(cfg) << "[clahe]\ntiles = 4\n";
  EXPECT_EQ(cxr_run({"--config", cfg.string(), "classify", "-m", model.string(), image.string()}).code,
            cli::kExitConfig);
}

TEST_F(CliTest, PreprocessStageOneMatchesClaheOracle) {
  const auto out = dir / "stage1.png";
  const auto r = cxr_run({"preprocess", image.string(), "--stage", "1", "-o", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto got = image::decode_image(image::read_file(out));
  const auto want = oracle::clahe(testing_support::to_oracle(image::decode_image(image::read_file(image))), 2.0, 8, 8);
  ASSERT_EQ(got.width, want.w);
  ASSERT_EQ(got.height, want.h);
  for (std::size_t i = 0; i < want.px.size(); ++i) ASSERT_EQ(got.pixels[i], want.px[i]) << i;

  const auto tensor = dir / "stage6.cxrw";
  ASSERT_EQ(cxr_run({"preprocess", image.string(), "-o", tensor.string()}).code, 0);
  const auto w = nn::load_weights(tensor);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w.entries().front().tensor.shape, (std::vector<std::int64_t>{3, 224, 224}));

  EXPECT_EQ(cxr_run({"preprocess", image.string(), "--stage", "5", "-o", (dir / "x.png").string()}).code,
            cli::kExitConfig);
}

TEST_F(CliTest, ExplainWritesSourceResolutionPngs) {
  const auto out = dir / "cam";
  const auto r = cxr_run({"explain", "-m", model.string(), image.string(), "-o", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto heat = image::decode_image(image::read_file(out / "heatmap.png"));
  const auto overlay = image::decode_png_rgb(image::read_file(out / "overlay.png"));
  EXPECT_EQ(heat.width, 300);
  EXPECT_EQ(heat.height, 260);
  EXPECT_EQ(overlay.width, 300);
  EXPECT_EQ(*std::max_element(heat.pixels.begin(), heat.pixels.end()), 255);
  EXPECT_NE(r.out.find("via gap_head on features"), std::string::npos) << r.out;

  const auto sc = cxr_run({"explain", "-m", model.string(), image.string(), "-o", out.string(), "--method",
                           "score_cam", "--top-k", "4", "--target", "virus"});
  ASSERT_EQ(sc.code, 0) << sc.err;
  EXPECT_NE(sc.out.find("explained: virus via score_cam"), std::string::npos) << sc.out;
}

TEST_F(CliTest, EvaluateMatchesMacroMetrics) {
  const auto& labels = models::default_class_labels();
  eval::DatasetManifest manifest;
  std::vector<std::vector<double>> probs;
  std::vector<int> truth;
  const auto m = service::load_model(model);
  for (int i = 0; i < 12; ++i) {
    const std::string name = "img" + std::to_string(i) + ".png";
    const auto img = testing_support::synthetic_cxr(240 + 7 * i, 256, 100 + i);
    image::write_file(dir / name, image::encode_png(img));
    manifest.entries.push_back({name, labels[i % 4], std::nullopt});
    probs.push_back(service::classify(*m, img, {}).probabilities);
    truth.push_back(i % 4);
  }
  eval::save_manifest(manifest, dir / "test.jsonl");
  const auto report = dir / "report.json";
  const auto r = cxr_run({"evaluate", "-m", model.string(), (dir / "test.jsonl").string(), "-o", report.string(),
                          "--threads", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto want = eval::macro_metrics(probs, truth, labels);
  EXPECT_EQ(json::parse(slurp(report)), json::parse(eval::to_json(want).dump()));
  EXPECT_EQ(r.out, eval::format_table(want));
}

TEST_F(CliTest, SplitReproducesTable) {
  const auto& labels = models::default_class_labels();
  eval::DatasetManifest manifest;
  const int sizes[] = {838, 858, 816, 833};
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < sizes[c]; ++i) manifest.entries.push_back({labels[c] + "/" + std::to_string(i) + ".png", labels[c], std::nullopt});
  }
  eval::save_manifest(manifest, dir / "all.jsonl");
  const auto out = dir / "splits";
  const auto r = cxr_run({"split", (dir / "all.jsonl").string(), "--seed", "3", "-o", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(eval::load_manifest(out / "train.jsonl", labels).entries.size(), 2674u);
  EXPECT_EQ(eval::load_manifest(out / "val.jsonl", labels).entries.size(), 332u);
  EXPECT_EQ(eval::load_manifest(out / "test.jsonl", labels).entries.size(), 339u);
  const auto result = eval::stratified_split(manifest, {}, 3, labels);
  EXPECT_EQ(r.out, eval::format_split_table(result, labels));
  EXPECT_EQ(eval::load_manifest(out / "test.jsonl", labels), result.test);
}

TEST_F(CliTest, ExitCodes) {
  const std::string m = model.string(), img = image.string();
  EXPECT_EQ(cxr_run({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(cxr_run({"classify", "-m", m, (dir / "missing.png").string()}).code, cli::kExitFile);
  EXPECT_EQ(cxr_run({"classify", "-m", (dir / "missing.cxrw").string(), img}).code, cli::kExitFile);

  auto bytes = image::read_file(model);
  bytes.resize(bytes.size() - 3);
  image::write_file(dir / "cut.cxrw", bytes);
  EXPECT_EQ(cxr_run({"classify", "-m", (dir / "cut.cxrw").string(), img}).code, cli::kExitWeights);

  std::ofstream(dir / "empty.jsonl") << "";
  EXPECT_EQ(cxr_run({"evaluate", "-m", m, (dir / "empty.jsonl").string()}).code, cli::kExitData);
  std::ofstream(dir / "bad.jsonl") << "{\"path\": \"a.png\", \"label\": \"covid\"}\n";
  EXPECT_EQ(cxr_run({"evaluate", "-m", m, (dir / "bad.jsonl").string()}).code, cli::kExitData);
  std::ofstream(dir / "gone.jsonl") << "{\"path\": \"gone.png\", \"label\": \"normal\"}\n";
  EXPECT_EQ(cxr_run({"evaluate", "-m", m, (dir / "gone.jsonl").string()}).code, cli::kExitData);

  EXPECT_EQ(cxr_run({"classify", "-m", m, img, "--clahe-clip", "0"}).code, cli::kExitConfig);
  EXPECT_EQ(cxr_run({"explain", "-m", m, img, "--alpha", "2"}).code, cli::kExitConfig);
  EXPECT_EQ(cxr_run({"explain", "-m", m, img, "--top-k", "3"}).code, cli::kExitConfig);
  EXPECT_EQ(cxr_run({"explain", "-m", m, img, "--method", "grad_cam"}).code, cli::kExitConfig);
  EXPECT_EQ(cxr_run({"explain", "-m", m, img, "--method", "score_cam", "--layer", "nope"}).code, cli::kExitConfig);
  EXPECT_EQ(cxr_run({"split", (dir / "empty.jsonl").string(), "--ratios", "0.5,0.5,0.5"}).code, cli::kExitConfig);
  EXPECT_EQ(cxr_run({"frobnicate"}).code, cli::kExitConfig);
  EXPECT_EQ(cxr_run({}).code, cli::kExitConfig);
}

TEST_F(CliTest, BinaryExitStatus) {
  auto status = [](const std::string& args) {
    const int raw = std::system((std::string(CXR_BINARY_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("--version"), 0);
  EXPECT_EQ(status("classify -m " + model.string() + " " + image.string()), 0);
  EXPECT_EQ(status("classify -m " + model.string() + " " + (dir / "none.png").string()), 2);
  EXPECT_EQ(status("explain -m " + model.string() + " " + image.string() + " --method grad_cam"), 5);
}
