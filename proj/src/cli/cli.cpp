#include "cxr/cli/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "CLI11.hpp"

#include "cxr/augment/augment.hpp"
#include "cxr/cli/config.hpp"
#include "cxr/error.hpp"
#include "cxr/evalmetrics/dataset.hpp"
#include "cxr/evalmetrics/metrics.hpp"
#include "cxr/explain/cam.hpp"
#include "cxr/imagecore/codec.hpp"
#include "cxr/imagecore/pipeline.hpp"
#include "cxr/models/models.hpp"
#include "cxr/nn/weights.hpp"
#include "cxr/service/engine.hpp"
#include "cxr/service/server.hpp"

namespace cxr::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr const char* kExitCodeHelp =
    "Exit codes: 0 ok, 1 internal error, 2 input file missing or unreadable, 3 bad weight file,\n"
    "4 manifest or dataset error, 5 bad flags, config, or parameter values.";

// A failure that already knows its exit code.
struct Exit {
  int code;
  std::string message;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  CliConfig config;
};

struct PreprocessFlags {
  std::optional<double> clahe_clip;
  std::vector<int> clahe_grid;
};

void add_preprocess_flags(CLI::App* cmd, PreprocessFlags& f) {
  cmd->add_option("--clahe-clip", f.clahe_clip, "CLAHE relative clip limit");
  cmd->add_option("--clahe-grid", f.clahe_grid, "CLAHE tiles as X Y")->expected(2)->delimiter(',');
}

service::PreprocessSettings settings_for(const Context& ctx, const PreprocessFlags& f) {
  service::PreprocessSettings s;
  s.clahe = ctx.config.clahe;
  s.stats = ctx.config.stats;
  if (f.clahe_clip) s.clahe.clip_limit = *f.clahe_clip;
  if (f.clahe_grid.size() == 2) {
    s.clahe.tiles_x = f.clahe_grid[0];
    s.clahe.tiles_y = f.clahe_grid[1];
  }
  s.clahe.validate();
  return s;
}

std::shared_ptr<const service::LoadedModel> open_model(const fs::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = image::read_file(path);
  } catch (const IoError& e) {
    throw Exit{kExitFile, e.what()};
  }
  try {
    return service::make_model(nn::parse_weights(bytes), bytes);
  } catch (const Error& e) {
    throw Exit{kExitWeights, path.string() + ": " + e.what()};
  }
}

image::GrayImage open_image(const fs::path& path) {
  try {
    return image::decode_image(image::read_file(path));
  } catch (const Error& e) {
    throw Exit{kExitFile, path.string() + ": " + e.what()};
  }
}

std::string format_probability(double p) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << p;
  return s.str();
}

void write_output(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  image::write_file(path, bytes);
}

// Single-tensor CXRW file holding a (C, H, W) image tensor.
void write_tensor(const fs::path& path, const std::string& name, const image::ImageTensor& t) {
  nn::WeightStore store;
  store.architecture = "tensor";
  store.add(name, {{t.channels, t.height, t.width}, t.data});
  write_output(path, nn::serialize_weights(store));
}

// ---------------------------------------------------------------------------

struct ClassifyArgs {
  std::string model;
  std::string image;
  bool json = false;
  PreprocessFlags pre;
};

int cmd_classify(Context& ctx, const ClassifyArgs& a) {
  const auto settings = settings_for(ctx, a.pre);
  const auto model = open_model(a.model);
  const auto img = open_image(a.image);
  const auto start = std::chrono::steady_clock::now();
  const auto c = service::classify(*model, img, settings);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (a.json) {
    ctx.out << service::classify_response(*model, c, settings, ms) << '\n';
    return kExitOk;
  }
  const auto& labels = model->graph.class_labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ctx.out << std::left << std::setw(12) << labels[i] << ' ' << format_probability(c.probabilities[i]) << '\n';
  }
  ctx.out << "predicted: " << labels[c.predicted] << '\n';
  return kExitOk;
}

struct ExplainArgs {
  std::string model;
  std::string image;
  std::string out = ".";
  std::string method = "gap_head";
  std::string layer;
  std::string target;
  std::optional<int> top_k;
  double alpha = 0.5;
  std::optional<int> batch;
  PreprocessFlags pre;
};

int cmd_explain(Context& ctx, const ExplainArgs& a) {
  const auto settings = settings_for(ctx, a.pre);
  service::ExplainOptions opt;
  try {
    opt.method = explain::parse_cam_method(a.method);
  } catch (const UnsupportedMethod& e) {
    throw Exit{kExitConfig, e.what()};
  }
  opt.layer = a.layer;
  opt.top_k = a.top_k;
  opt.alpha = a.alpha;
  opt.scorecam_batch = a.batch.value_or(ctx.config.service.scorecam_batch);
  if (opt.top_k && opt.method != explain::CamMethod::kScoreCam) throw Exit{kExitConfig, "--top-k applies to score_cam only"};

  const auto model = open_model(a.model);
  if (!a.target.empty()) {
    try {
      opt.target_class = eval::label_index(a.target, model->graph.class_labels);
    } catch (const ManifestError&) {
      throw Exit{kExitConfig, "unknown target label '" + a.target + "'"};
    }
  }
  const auto img = open_image(a.image);
  service::Explanation e;
  try {
    e = service::explain_image(*model, img, settings, opt);
  } catch (const LayerNotFound& ex) {
    throw Exit{kExitConfig, ex.what()};
  } catch (const HeadError& ex) {
    throw Exit{kExitConfig, ex.what()};
  } catch (const ConfigError& ex) {
    throw Exit{kExitConfig, ex.what()};
  }

  const fs::path dir(a.out);
  write_output(dir / "heatmap.png", image::encode_png(explain::heatmap_to_gray(e.heatmap)));
  write_output(dir / "overlay.png", image::encode_png(e.overlay));
  const auto& labels = model->graph.class_labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ctx.out << std::left << std::setw(12) << labels[i] << ' '
            << format_probability(e.classification.probabilities[i]) << '\n';
  }
  ctx.out << "predicted: " << labels[e.classification.predicted] << '\n'
          << "explained: " << labels[e.target_class] << " via " << explain::to_string(opt.method) << " on "
          << e.layer << '\n'
          << "wrote " << (dir / "heatmap.png").string() << " and " << (dir / "overlay.png").string() << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::string model;
  std::string manifest;
  std::string root;
  std::string out = "report.json";
  int threads = 0;
  PreprocessFlags pre;
};

int cmd_evaluate(Context& ctx, const EvaluateArgs& a) {
  const auto settings = settings_for(ctx, a.pre);
  const auto model = open_model(a.model);
  const auto& labels = model->graph.class_labels;
  eval::DatasetManifest manifest;
  try {
    manifest = eval::load_manifest(a.manifest, labels);
  } catch (const IoError& e) {
    throw Exit{kExitFile, e.what()};
  } catch (const ManifestError& e) {
    throw Exit{kExitData, e.what()};
  }
  if (manifest.entries.empty()) throw Exit{kExitData, "empty manifest"};
  const fs::path root = a.root.empty() ? fs::path(a.manifest).parent_path() : fs::path(a.root);

  const std::size_t n = manifest.entries.size();
  std::vector<std::vector<double>> probabilities(n);
  std::vector<std::string> failures(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const fs::path p = root / manifest.entries[i].path;
      try {
        probabilities[i] = service::classify(*model, image::decode_image(image::read_file(p)), settings).probabilities;
      } catch (const std::exception& e) {
        failures[i] = p.string() + ": " + e.what();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned count = a.threads > 0 ? static_cast<unsigned>(a.threads) : hw;
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::min<std::size_t>(count, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (!f.empty()) throw Exit{kExitData, "unreadable image " + f};
  }

  std::vector<int> truth;
  for (const auto& e : manifest.entries) truth.push_back(eval::label_index(e.label, labels));
  const auto report = eval::macro_metrics(probabilities, truth, labels);
  ctx.out << eval::format_table(report);
  write_output(a.out, [&] {
    const std::string text = eval::to_json(report).dump(2) + "\n";
    return std::vector<std::uint8_t>(text.begin(), text.end());
  }());
  ctx.err << "wrote " << a.out << '\n';
  return kExitOk;
}

struct SplitArgs {
  std::string manifest;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::vector<double> ratios{0.8, 0.1, 0.1};
};

int cmd_split(Context& ctx, const SplitArgs& a) {
  const auto& labels = models::default_class_labels();
  if (a.ratios.size() != 3) throw Exit{kExitConfig, "--ratios needs three values"};
  const eval::SplitRatios ratios{a.ratios[0], a.ratios[1], a.ratios[2]};
  ratios.validate();
  eval::DatasetManifest manifest;
  try {
    manifest = eval::load_manifest(a.manifest, labels);
  } catch (const IoError& e) {
    throw Exit{kExitFile, e.what()};
  } catch (const ManifestError& e) {
    throw Exit{kExitData, e.what()};
  }
  const auto result = eval::stratified_split(manifest, ratios, a.seed, labels);
  for (const auto& w : result.warnings) ctx.err << "warning: " << w << '\n';
  const fs::path dir(a.out);
  fs::create_directories(dir);
  eval::save_manifest(result.train, dir / "train.jsonl");
  eval::save_manifest(result.val, dir / "val.jsonl");
  eval::save_manifest(result.test, dir / "test.jsonl");
  ctx.out << eval::format_split_table(result, labels);
  return kExitOk;
}

struct PreprocessArgs {
  std::string image;
  int stage = 6;
  std::string out;
  std::string crop = "center";
  PreprocessFlags pre;
};

int cmd_preprocess(Context& ctx, const PreprocessArgs& a) {
  auto settings = settings_for(ctx, a.pre);
  if (a.crop == "full") settings.crop = image::CropPolicy::kFullResize;
  const auto img = open_image(a.image);
  const auto trace = image::inference_preprocess_trace(img, settings.clahe, settings.stats, settings.crop);
  const auto& t = trace.stages.at(static_cast<std::size_t>(a.stage));
  const fs::path out(a.out);
  static const char* kNames[] = {"decoded", "clahe", "resized", "cropped", "scaled", "replicated", "normalized"};
  if (out.extension() == ".png") {
    if (a.stage > 3) throw Exit{kExitConfig, "PNG output is available for stages 0-3 only (8-bit range)"};
    write_output(out, image::encode_png(image::to_gray(t)));
  } else {
    write_tensor(out, std::string("stage") + std::to_string(a.stage) + "_" + kNames[a.stage], t);
  }
  ctx.out << "stage " << a.stage << " (" << kNames[a.stage] << "): " << t.channels << "x" << t.height << "x"
          << t.width << " -> " << out.string() << '\n';
  return kExitOk;
}

struct AugmentArgs {
  std::string image;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_augment(Context& ctx, const AugmentArgs& a) {
  const auto img = open_image(a.image);
  augment::RngState rng(a.seed);
  const auto t = augment::train_transform(img, ctx.config.clahe, ctx.config.stats, ctx.config.augment, rng);
  write_tensor(a.out, "train_transform", t);
  ctx.out << "train_transform seed " << a.seed << ": " << t.channels << "x" << t.height << "x" << t.width << " -> "
          << a.out << '\n';
  return kExitOk;
}

struct FixtureArgs {
  std::string arch;
  std::uint64_t seed = 0;
  int classes = 4;
  std::string out;
};

int cmd_fixture(Context& ctx, const FixtureArgs& a) {
  nn::ModelGraph g;
  try {
    g = models::build_architecture(a.arch, a.classes);
  } catch (const Error& e) {
    throw Exit{kExitConfig, e.what()};
  }
  const auto store = models::random_weights(g, a.seed);
  write_output(a.out, nn::serialize_weights(store));
  ctx.out << a.arch << " seed " << a.seed << ": " << nn::count_params(g) << " parameters -> " << a.out << '\n';
  return kExitOk;
}

struct ServeArgs {
  std::string model;
  std::string host;
  std::optional<int> port;
};

int cmd_serve(Context& ctx, const ServeArgs& a) {
  service::ServiceConfig cfg = service::config_from_env(ctx.config.service);
  if (!a.model.empty()) cfg.model_path = a.model;
  if (!a.host.empty()) cfg.host = a.host;
  if (a.port) cfg.port = *a.port;
  cfg.preprocessing.clahe = ctx.config.clahe;
  cfg.preprocessing.stats = ctx.config.stats;
  cfg.validate();

  // Block termination signals here so a dedicated thread can wait for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Service svc(cfg);
  service::HttpServer server(svc);
  const int port = server.bind(cfg.host, cfg.port);
  if (port < 0) throw Exit{kExitConfig, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port)};
  ctx.err << "cxr serve: listening on " << cfg.host << ":" << port << (svc.ready() ? "" : " (degraded)") << '\n';

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UnsupportedMethod*>(&e) ||
      dynamic_cast<const LayerNotFound*>(&e) || dynamic_cast<const IndexError*>(&e) ||
      dynamic_cast<const GridError*>(&e) || dynamic_cast<const CropError*>(&e)) {
    return kExitConfig;
  }
  if (dynamic_cast<const ManifestError*>(&e)) return kExitData;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const DecodeError*>(&e) ||
      dynamic_cast<const UnsupportedFormat*>(&e)) {
    return kExitFile;
  }
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IntegrityError*>(&e) ||
      dynamic_cast<const UnknownArchitecture*>(&e) || dynamic_cast<const MissingWeight*>(&e)) {
    return kExitWeights;
  }
  return kExitInternal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explainable chest X-ray classification toolkit", "cxr"};
  app.footer(kExitCodeHelp);
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "TOML config file")->check(CLI::ExistingFile);

  ClassifyArgs classify;
  auto* c = app.add_subcommand("classify", "Classify one image");
  c->add_option("--model,-m", classify.model, "CXRW weight file")->required();
  c->add_option("image", classify.image, "PNG or JPEG image")->required();
  c->add_flag("--json", classify.json, "Emit the service's classify JSON");
  add_preprocess_flags(c, classify.pre);

  ExplainArgs explain;
  auto* x = app.add_subcommand("explain", "Classify one image and write heatmap.png and overlay.png");
  x->add_option("--model,-m", explain.model, "CXRW weight file")->required();
  x->add_option("image", explain.image, "PNG or JPEG image")->required();
  x->add_option("--out,-o", explain.out, "Output directory")->capture_default_str();
  x->add_option("--method", explain.method, "gap_head or score_cam")->capture_default_str();
  x->add_option("--layer", explain.layer, "Node id to explain (default: the tensor entering GAP)");
  x->add_option("--target", explain.target, "Class label to explain (default: the prediction)");
  x->add_option("--top-k", explain.top_k, "score_cam: keep the k maps with the largest peak");
  x->add_option("--alpha", explain.alpha, "Overlay opacity in [0, 1]")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  x->add_option("--batch", explain.batch, "score_cam forward batch size")->check(CLI::PositiveNumber);
  add_preprocess_flags(x, explain.pre);

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "Score a model on a JSONL manifest");
  e->add_option("--model,-m", evaluate.model, "CXRW weight file")->required();
  e->add_option("manifest", evaluate.manifest, "JSONL manifest of {path, label}")->required();
  e->add_option("--root", evaluate.root, "Directory image paths are relative to (default: the manifest's)");
  e->add_option("--out,-o", evaluate.out, "Report JSON path")->capture_default_str();
  e->add_option("--threads", evaluate.threads, "Worker threads (default: hardware concurrency)");
  add_preprocess_flags(e, evaluate.pre);

  SplitArgs split;
  auto* s = app.add_subcommand("split", "Stratified 80/10/10 split of a manifest");
  s->add_option("manifest", split.manifest, "JSONL manifest")->required();
  s->add_option("--seed", split.seed, "Shuffle seed")->capture_default_str();
  s->add_option("--out,-o", split.out, "Directory for train/val/test.jsonl")->capture_default_str();
  s->add_option("--ratios", split.ratios, "train,val,test fractions")->expected(3)->delimiter(',');

  PreprocessArgs preprocess;
  auto* p = app.add_subcommand("preprocess", "Dump the evaluation pipeline after one stage");
  p->add_option("image", preprocess.image, "PNG or JPEG image")->required();
  p->add_option("--stage", preprocess.stage,
                "0 decoded, 1 clahe, 2 resized, 3 cropped, 4 scaled, 5 replicated, 6 normalized")
      ->check(CLI::Range(0, 6))
      ->capture_default_str();
  p->add_option("--out,-o", preprocess.out, "Output: .png (stages 0-3) or a CXRW tensor file")->required();
  p->add_option("--crop", preprocess.crop, "center or full")->check(CLI::IsMember({"center", "full"}))->capture_default_str();
  add_preprocess_flags(p, preprocess.pre);

  AugmentArgs aug;
  auto* g = app.add_subcommand("augment", "Apply the seeded training transform to one image");
  g->add_option("image", aug.image, "PNG or JPEG image")->required();
  g->add_option("--seed", aug.seed, "RNG seed")->capture_default_str();
  g->add_option("--out,-o", aug.out, "CXRW tensor file")->required();

  FixtureArgs fixture;
  auto* f = app.add_subcommand("fixture", "Write a deterministic random-weight CXRW file");
  f->add_option("--arch", fixture.arch, "resnet18, convnext_tiny or tiny_cnn")->required();
  f->add_option("--seed", fixture.seed, "Weight seed")->capture_default_str();
  f->add_option("--classes", fixture.classes, "Head size")->check(CLI::PositiveNumber)->capture_default_str();
  f->add_option("--out,-o", fixture.out, "Output path")->required();

  ServeArgs serve;
  auto* v = app.add_subcommand("serve", "Run the HTTP service");
  v->add_option("--model,-m", serve.model, "CXRW weight file (overrides CXR_MODEL_PATH)");
  v->add_option("--host", serve.host, "Bind address");
  v->add_option("--port", serve.port, "Port (overrides CXR_PORT)");

  std::vector<std::string> argv_store{"cxr"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return kExitConfig;
  }

  try {
    Context ctx{out, err, {}};
    if (!config_path.empty()) ctx.config = load_config(config_path);
    ctx.config.validate();
    if (*c) return cmd_classify(ctx, classify);
    if (*x) return cmd_explain(ctx, explain);
    if (*e) return cmd_evaluate(ctx, evaluate);
    if (*s) return cmd_split(ctx, split);
    if (*p) return cmd_preprocess(ctx, preprocess);
    if (*g) return cmd_augment(ctx, aug);
    if (*f) return cmd_fixture(ctx, fixture);
    if (*v) return cmd_serve(ctx, serve);
    return kExitConfig;
  } catch (const Exit& ex) {
    err << "error: " << ex.message << '\n';
    return ex.code;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return exit_code_for(ex);
  }
}

}  // namespace cxr::cli
