// allday: synthetic data, training, evaluation and inference from the shell.
//
// Exit status: 0 success, 1 usage error, 2 runtime failure.

#include "allday/data.hpp"
#include "allday/dataset.hpp"
#include "allday/errors.hpp"
#include "allday/evaluation.hpp"
#include "allday/image_io.hpp"
#include "allday/synth.hpp"
#include "allday/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>

namespace fs = std::filesystem;
using namespace allday;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_root() {
  const char* env = std::getenv("ALLDAY_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

// Maps an --ablation word onto the config key it switches.
std::pair<std::string, std::string> ablation_setting(const std::string& word) {
  static const std::set<std::string> encoders = {"both", "cnn_only", "transformer_only"};
  static const std::set<std::string> fusions = {"paper", "concatenation", "dot_product", "channel_only"};
  static const std::set<std::string> pairs = {"day-night", "day-day", "night-night"};
  if (encoders.count(word)) return {"encoder", word};
  if (fusions.count(word)) return {"fusion", word};
  if (pairs.count(word)) return {"pair_mode", word};
  if (word == "min_reprojection") return {"source_aggregation", "min"};
  throw UsageError("unknown ablation '" + word + "'");
}

struct TrainArgs {
  std::string preset = "desk";
  std::string config_file;
  std::string data;
  std::string out;
  std::string resume;
  std::vector<std::string> sets;
  std::vector<std::string> ablations;
  std::optional<int64_t> epochs, max_steps, batch_size, warmup_epochs, checkpoint_every, seed;
  std::optional<double> lr;
  std::optional<int> workers;
};

TrainingConfig resolve_training_config(const TrainArgs& a) {
  TrainingConfig cfg;
  if (a.preset == "desk") {
    cfg = TrainingConfig::desk();
  } else if (a.preset == "paper") {
    cfg = TrainingConfig::paper();
  } else {
    throw UsageError("unknown preset '" + a.preset + "' (desk or paper)");
  }

  KeyValues from_file;
  if (!a.config_file.empty()) from_file = read_key_values(a.config_file);

  KeyValues from_cli;
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    from_cli[s.substr(0, eq)] = s.substr(eq + 1);
  }
  for (const auto& w : a.ablations) from_cli.insert_or_assign(ablation_setting(w).first, ablation_setting(w).second);
  const auto put = [&](const char* key, const auto& v) {
    if (v) from_cli[key] = std::to_string(*v);
  };
  put("epochs", a.epochs);
  put("max_steps", a.max_steps);
  put("batch_size", a.batch_size);
  put("warmup_epochs", a.warmup_epochs);
  put("checkpoint_every", a.checkpoint_every);
  put("seed", a.seed);
  put("workers", a.workers);
  if (a.lr) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *a.lr);
    from_cli["lr_peak"] = buf;
  }

  cfg.apply(from_file);
  cfg.apply(from_cli);
  cfg.validate();

  std::cout << "config (" << a.preset << " preset; cli > file > default):\n";
  for (const auto& [k, v] : cfg.to_key_values()) {
    const char* origin = from_cli.count(k) ? "cli" : from_file.count(k) ? "file" : "default";
    std::cout << "  " << k << " = " << v << "  [" << origin << "]\n";
  }
  return cfg;
}

int run_synth(const std::string& out, int64_t frames, uint64_t seed, const std::string& scene) {
  SceneSpec spec;
  if (scene == "street") {
    spec = SceneSpec::street(seed);
  } else if (scene == "plane") {
    spec = SceneSpec::plane(10.0, seed);
  } else {
    throw UsageError("unknown scene '" + scene + "' (street or plane)");
  }
  synth_generate(out, spec, frames);
  std::cout << "wrote " << frames << " frames to " << out << "\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  const auto cfg = resolve_training_config(a);
  const SequenceDataset dataset(a.data, cfg.data);
  const fs::path out = a.out.empty() ? output_root() / "train" : fs::path(a.out);
  FitOptions options;
  if (!a.resume.empty()) options.resume = a.resume;
  options.on_step = [](const StepStats& s) {
    if (s.step % 10 == 0) {
      std::printf("step %6lld  lr %.3e  loss %.5f  day %.5f  night %.5f\n", static_cast<long long>(s.step), s.lr,
                  s.loss, s.loss_day, s.loss_night);
      std::fflush(stdout);
    }
  };
  const auto result = fit(cfg, dataset, out, options);
  std::cout << "trained " << result.trace.size() << " steps; checkpoint " << result.final_checkpoint.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string depth_png;
  std::string split = "both";
  bool no_scale = false;
  double cap = kDefaultDepthCap;
  double density = 0.05;
  uint64_t seed = 0;
  int64_t first_frame = 0;
  int64_t end_frame = -1;
};

int run_eval(const EvalArgs& a) {
  if (a.split != "both" && a.split != "day" && a.split != "night") throw UsageError("--split must be day, night or both");
  const auto ckpt = load_checkpoint(a.ckpt);
  auto cfg = config_from_checkpoint(ckpt);
  auto model = load_depth_model(ckpt);
  auto data_cfg = cfg.data;
  data_cfg.pair_mode = PairMode::kDayNight;
  data_cfg.first_frame = a.first_frame;
  data_cfg.end_frame = a.end_frame;
  const SequenceDataset dataset(a.data, data_cfg);

  EvalOptions opt;
  opt.cap = a.cap;
  opt.median_scaling = !a.no_scale;
  opt.density = a.density;
  opt.seed = a.seed;
  opt.day = a.split != "night";
  opt.night = a.split != "day";
  if (!a.depth_png.empty()) opt.depth_png_dir = a.depth_png;
  const auto report = evaluate(model, dataset, opt);

  const fs::path out = a.out.empty() ? output_root() / "eval.csv" : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file_atomically(out, report_csv(report));
  std::cout << report_table(report) << "report: " << out.string() << "\n";
  return 0;
}

int run_infer(const std::string& ckpt_path, const std::string& image_path, const std::string& out, bool as_night,
              uint64_t seed) {
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto cfg = config_from_checkpoint(ckpt);
  auto model = load_depth_model(ckpt);
  const auto raw = read_png(image_path);
  // Only the image geometry matters here; intrinsics are not used for inference.
  const CameraIntrinsics k{1.0, 1.0, 0.0, 0.0, raw.size(2), raw.size(1)};
  const auto& pp = cfg.data.preprocess;
  torch::Tensor day;
  torch::Tensor night;
  if (as_night) {
    night = preprocess(raw, k, pp).image;
    day = approximate_day_from_night(night);
  } else {
    day = preprocess(raw, k, pp).image;
    night = preprocess(StubTranslator({.seed = seed}).translate(raw, 0), k, pp).image;
  }
  const auto win = crop_window(pp, raw.size(1), raw.size(2));
  const auto depth = predict_depth(model, day, night, win.height, win.width);

  fs::path base(out);
  if (base.extension() == ".png" || base.extension() == ".bin") base.replace_extension();
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  write_png(fs::path(base.string() + ".png"), colorize_depth(depth));
  write_depth(fs::path(base.string() + ".bin"), depth);
  std::cout << "wrote " << base.string() << ".png and " << base.string() << ".bin\n";
  return 0;
}

int run_translate(const std::string& in, const std::string& out, uint64_t seed) {
  fs::path src(in);
  if (fs::is_directory(src / "frames")) src /= "frames";
  if (!fs::is_directory(src)) throw DataError("no such directory " + src.string());
  std::vector<fs::path> frames;
  for (const auto& e : fs::directory_iterator(src)) {
    if (e.path().extension() == ".png") frames.push_back(e.path());
  }
  std::sort(frames.begin(), frames.end());
  if (fs::weakly_canonical(out) == fs::weakly_canonical(src)) throw UsageError("--out must differ from the input");
  fs::create_directories(out);
  const StubTranslator stub({.seed = seed});
  int64_t written = 0;
  for (const auto& f : frames) {
    const auto stem = f.stem().string();
    char* end = nullptr;
    const long long idx = std::strtoll(stem.c_str(), &end, 10);
    if (stem.empty() || *end != '\0') continue;
    write_png(fs::path(out) / frame_name(idx, ".png"), stub.translate(read_png(f), idx));
    ++written;
  }
  std::cout << "translated " << written << " frames into " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Day/night self-supervised depth: data synthesis, training, evaluation, inference"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-data", "Render a synthetic street sequence with ground truth");
  std::string synth_out;
  int64_t synth_frames = 25;
  uint64_t synth_seed = 0;
  std::string synth_scene = "street";
  synth->add_option("--out", synth_out, "Output sequence directory")->required();
  synth->add_option("--frames", synth_frames, "Number of frames")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Scene seed")->capture_default_str();
  synth->add_option("--scene", synth_scene, "street or plane")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train depth and pose networks on a sequence");
  TrainArgs ta;
  train->add_option("--data", ta.data, "Sequence directory")->required();
  train->add_option("--out", ta.out, "Run directory (default $ALLDAY_OUTPUT_ROOT/train)");
  train->add_option("--config", ta.config_file, "key=value config file");
  train->add_option("--preset", ta.preset, "desk or paper")->capture_default_str();
  train->add_option("--set", ta.sets, "Override any config key: key=value");
  train->add_option("--ablation", ta.ablations,
                    "cnn_only, transformer_only, concatenation, dot_product, channel_only, day-day, night-night, "
                    "min_reprojection");
  train->add_option("--resume", ta.resume, "Checkpoint to resume from");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--max-steps", ta.max_steps);
  train->add_option("--batch-size", ta.batch_size);
  train->add_option("--warmup-epochs", ta.warmup_epochs);
  train->add_option("--checkpoint-every", ta.checkpoint_every);
  train->add_option("--lr", ta.lr, "Peak learning rate");
  train->add_option("--seed", ta.seed);
  train->add_option("--workers", ta.workers, "Batch prefetch threads");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against ground-truth depth");
  EvalArgs ea;
  eval->add_option("--ckpt", ea.ckpt, "Checkpoint file")->required();
  eval->add_option("--data", ea.data, "Sequence directory")->required();
  eval->add_option("--out", ea.out, "CSV report path (default $ALLDAY_OUTPUT_ROOT/eval.csv)");
  eval->add_flag("--no-scale", ea.no_scale, "Disable median scaling");
  eval->add_option("--cap", ea.cap, "Maximum depth in meters")->capture_default_str();
  eval->add_option("--density", ea.density, "Fraction of ground-truth pixels kept")->capture_default_str();
  eval->add_option("--split", ea.split, "day, night or both")->capture_default_str();
  eval->add_option("--depth-png", ea.depth_png, "Directory for colourised predictions");
  eval->add_option("--seed", ea.seed, "Ground-truth sampling seed")->capture_default_str();
  eval->add_option("--first-frame", ea.first_frame)->capture_default_str();
  eval->add_option("--end-frame", ea.end_frame, "Exclusive; -1 for all")->capture_default_str();

  auto* infer = app.add_subcommand("infer", "Predict depth for one image");
  std::string infer_ckpt, infer_image, infer_out;
  bool infer_night = false;
  uint64_t infer_seed = 0;
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint file")->required();
  infer->add_option("--image", infer_image, "Input PNG")->required();
  infer->add_option("--out", infer_out, "Output prefix; writes <prefix>.png and <prefix>.bin")->required();
  infer->add_flag("--night", infer_night, "The input is a night image");
  infer->add_option("--seed", infer_seed, "Translator seed")->capture_default_str();

  auto* translate = app.add_subcommand("translate", "Apply the synthetic night translator to a frame folder");
  std::string tr_in, tr_out;
  uint64_t tr_seed = 0;
  translate->add_option("--in", tr_in, "Sequence or frame directory")->required();
  translate->add_option("--out", tr_out, "Output directory")->required();
  translate->add_option("--seed", tr_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*synth) return run_synth(synth_out, synth_frames, synth_seed, synth_scene);
    if (*train) return run_train(ta);
    if (*eval) return run_eval(ea);
    if (*infer) return run_infer(infer_ckpt, infer_image, infer_out, infer_night, infer_seed);
    if (*translate) return run_translate(tr_in, tr_out, tr_seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
