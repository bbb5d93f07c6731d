#include "allday/training.hpp"

#include "allday/errors.hpp"
#include "allday/image_io.hpp"
#include "allday/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace allday {

namespace fs = std::filesystem;

TrainingConfig TrainingConfig::paper() { return {}; }

TrainingConfig TrainingConfig::desk() {
  TrainingConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 2;
  cfg.lr_peak = 5e-4;
  cfg.warmup_epochs = 1;
  cfg.grad_clip = 10.0;
  cfg.model = ModelConfig{};
  cfg.data.preprocess = PreprocessConfig::desk();
  return cfg;
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (warmup_epochs < 0 || (epochs > 0 && warmup_epochs >= epochs)) {
    throw ConfigError("warmup_epochs must be in [0, epochs)");
  }
  // BatchNorm in the fusion gate needs more than one value per channel.
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(lr_peak > 0.0)) throw ConfigError("lr_peak must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must be in [0, 1)");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
  if (smoothness_weight < 0.0) throw ConfigError("smoothness_weight must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  photometric.validate();
  model.validate();
  if (data.preprocess.out_height != model.height || data.preprocess.out_width != model.width) {
    throw ConfigError("preprocess output size must equal the model input size");
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string units_string(const std::array<int64_t, 3>& u) {
  return std::to_string(u[0]) + "," + std::to_string(u[1]) + "," + std::to_string(u[2]);
}

std::array<int64_t, 3> parse_units(const std::string& s) {
  std::array<int64_t, 3> out{};
  std::stringstream ss(s);
  std::string item;
  size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == 3) throw ConfigError("cnn_units needs three counts, got '" + s + "'");
    try {
      size_t used = 0;
      out[n] = std::stoll(item, &used);
      if (used != item.size() || out[n] < 1) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("bad cnn_units '" + s + "'");
    }
    ++n;
  }
  if (n != 3) throw ConfigError("cnn_units needs three counts, got '" + s + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
}

SourceAggregation parse_aggregation(const std::string& v) {
  if (v == "mean") return SourceAggregation::kMean;
  if (v == "min") return SourceAggregation::kPerPixelMin;
  throw ConfigError("source_aggregation must be mean or min, got '" + v + "'");
}

}  // namespace

KeyValues TrainingConfig::to_key_values() const {
  const auto& t = model.transformer;
  return {
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"lr_peak", fmt_double(lr_peak)},
      {"warmup_epochs", std::to_string(warmup_epochs)},
      {"beta1", fmt_double(beta1)},
      {"beta2", fmt_double(beta2)},
      {"seed", std::to_string(seed)},
      {"alpha", fmt_double(photometric.alpha)},
      {"source_aggregation", photometric.source_aggregation == SourceAggregation::kMean ? "mean" : "min"},
      {"grad_clip", fmt_double(grad_clip)},
      {"smoothness_weight", fmt_double(smoothness_weight)},
      {"max_steps", std::to_string(max_steps)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"workers", std::to_string(workers)},
      {"height", std::to_string(model.height)},
      {"width", std::to_string(model.width)},
      {"encoder", to_string(model.encoder)},
      {"cnn_units", units_string(model.cnn.units)},
      {"vit_patch", std::to_string(t.patch_size)},
      {"vit_dim", std::to_string(t.latent_dim)},
      {"vit_depth", std::to_string(t.depth)},
      {"vit_heads", std::to_string(t.heads)},
      {"vit_head_dim", std::to_string(t.head_dim)},
      {"vit_mlp_ratio", fmt_double(t.mlp_ratio)},
      {"fusion", to_string(model.fusion.mode)},
      {"fusion_reduction", std::to_string(model.fusion.reduction)},
      {"spatial_kernel", std::to_string(model.fusion.spatial_kernel)},
      {"d_min", fmt_double(model.d_min)},
      {"d_max", fmt_double(model.d_max)},
      {"crop", data.preprocess.crop ? "1" : "0"},
      {"crop_height", std::to_string(data.preprocess.crop_height)},
      {"crop_width", std::to_string(data.preprocess.crop_width)},
      {"pair_mode", to_string(data.pair_mode)},
      {"translator", data.translator},
      {"translator_seed", std::to_string(data.translator_seed)},
      {"first_frame", std::to_string(data.first_frame)},
      {"end_frame", std::to_string(data.end_frame)},
  };
}

void TrainingConfig::apply(const KeyValues& kv) {
  const std::string origin = "config";
  for (const auto& [key, value] : kv) {
    const auto d = [&] {
      try {
        return kv_double(kv, key, origin);
      } catch (const DataError& e) {
        throw ConfigError(e.what());
      }
    };
    const auto i = [&] {
      try {
        return kv_int(kv, key, origin);
      } catch (const DataError& e) {
        throw ConfigError(e.what());
      }
    };
    auto& t = model.transformer;
    if (key == "epochs") epochs = i();
    else if (key == "batch_size") batch_size = i();
    else if (key == "lr_peak") lr_peak = d();
    else if (key == "warmup_epochs") warmup_epochs = i();
    else if (key == "beta1") beta1 = d();
    else if (key == "beta2") beta2 = d();
    else if (key == "seed") seed = static_cast<uint64_t>(i());
    else if (key == "alpha") photometric.alpha = d();
    else if (key == "source_aggregation") photometric.source_aggregation = parse_aggregation(value);
    else if (key == "grad_clip") grad_clip = d();
    else if (key == "smoothness_weight") smoothness_weight = d();
    else if (key == "max_steps") max_steps = i();
    else if (key == "checkpoint_every") checkpoint_every = i();
    else if (key == "workers") workers = static_cast<int>(i());
    else if (key == "height") model.height = data.preprocess.out_height = i();
    else if (key == "width") model.width = data.preprocess.out_width = i();
    else if (key == "encoder") model.encoder = parse_encoder_design(value);
    else if (key == "cnn_units") model.cnn.units = parse_units(value);
    else if (key == "vit_patch") t.patch_size = i();
    else if (key == "vit_dim") t.latent_dim = i();
    else if (key == "vit_depth") t.depth = i();
    else if (key == "vit_heads") t.heads = i();
    else if (key == "vit_head_dim") t.head_dim = i();
    else if (key == "vit_mlp_ratio") t.mlp_ratio = d();
    else if (key == "fusion") model.fusion.mode = parse_fusion_mode(value);
    else if (key == "fusion_reduction") model.fusion.reduction = i();
    else if (key == "spatial_kernel") model.fusion.spatial_kernel = i();
    else if (key == "d_min") model.d_min = d();
    else if (key == "d_max") model.d_max = d();
    else if (key == "crop") data.preprocess.crop = parse_bool(key, value);
    else if (key == "crop_height") data.preprocess.crop_height = i();
    else if (key == "crop_width") data.preprocess.crop_width = i();
    else if (key == "pair_mode") data.pair_mode = parse_pair_mode(value);
    else if (key == "translator") data.translator = value;
    else if (key == "translator_seed") data.translator_seed = static_cast<uint64_t>(i());
    else if (key == "first_frame") data.first_frame = i();
    else if (key == "end_frame") data.end_frame = i();
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

double lr_at(double step, int64_t steps_per_epoch, const TrainingConfig& cfg) {
  const double warm = static_cast<double>(cfg.warmup_epochs * steps_per_epoch);
  const double total = static_cast<double>(cfg.epochs * steps_per_epoch);
  if (step < 0.0 || step >= total) return 0.0;
  if (step < warm) return cfg.lr_peak * step / warm;
  const double progress = (step - warm) / (total - warm);
  return cfg.lr_peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<std::vector<size_t>> epoch_batches(size_t dataset_size, int64_t batch_size, uint64_t seed, int64_t epoch) {
  TORCH_CHECK(batch_size > 0, "batch_size must be positive");
  std::vector<size_t> order(dataset_size);
  for (size_t i = 0; i < dataset_size; ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  const auto bs = static_cast<size_t>(batch_size);
  std::vector<std::vector<size_t>> groups;
  for (size_t start = 0; start + bs <= dataset_size; start += bs) {
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(start + bs));
  }
  return groups;
}

namespace {

void load_module(torch::nn::Module& module, const std::string& prefix, const Checkpoint& ckpt) {
  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters()) {
    const auto* t = ckpt.find("param/" + prefix + item.key());
    if (!t) throw DataError("checkpoint lacks parameter " + prefix + item.key());
    if (t->sizes() != item.value().sizes()) throw DataError("checkpoint shape mismatch for " + prefix + item.key());
    item.value().copy_(*t);
  }
  for (auto& item : module.named_buffers()) {
    const auto* t = ckpt.find("buffer/" + prefix + item.key());
    if (!t) throw DataError("checkpoint lacks buffer " + prefix + item.key());
    if (t->sizes() != item.value().sizes()) throw DataError("checkpoint shape mismatch for " + prefix + item.key());
    item.value().copy_(*t);
  }
}

nlohmann::json config_json(const TrainingConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : cfg.to_key_values()) j[k] = v;
  return j;
}

}  // namespace

TrainingConfig config_from_checkpoint(const Checkpoint& ckpt) {
  KeyValues kv;
  for (const auto& [k, v] : ckpt.config.items()) kv[k] = v.get<std::string>();
  auto cfg = TrainingConfig::desk();
  cfg.apply(kv);
  return cfg;
}

DepthModel load_depth_model(const Checkpoint& ckpt) {
  const auto cfg = config_from_checkpoint(ckpt);
  DepthModel model(cfg.model);
  load_module(*model, "depth.", ckpt);
  model->eval();
  return model;
}

Trainer::Trainer(TrainingConfig cfg, int64_t steps_per_epoch) : cfg_(std::move(cfg)), steps_per_epoch_(steps_per_epoch) {
  cfg_.validate();
  build();
}

Trainer::Trainer(const Checkpoint& ckpt, int64_t steps_per_epoch)
    : cfg_(config_from_checkpoint(ckpt)), steps_per_epoch_(steps_per_epoch) {
  cfg_.validate();
  build();
  load_module(*nets_, "", ckpt);
  step_ = ckpt.step;
  for (auto& item : nets_->named_parameters()) {
    const auto base = "optim/" + item.key() + "/";
    const auto* step = ckpt.find(base + "step");
    if (!step) continue;  // parameter never updated
    const auto* m = ckpt.find(base + "exp_avg");
    const auto* v = ckpt.find(base + "exp_avg_sq");
    if (!m || !v) throw DataError("checkpoint has incomplete optimizer state for " + item.key());
    auto state = std::make_unique<torch::optim::AdamParamState>();
    state->step(step->item<int64_t>());
    state->exp_avg(m->clone());
    state->exp_avg_sq(v->clone());
    optimizer_->state()[item.value().unsafeGetTensorImpl()] = std::move(state);
  }
}

void Trainer::build() {
  torch::manual_seed(cfg_.seed);
  nets_ = Networks(cfg_.model);
  optimizer_ = std::make_unique<torch::optim::Adam>(
      nets_->parameters(), torch::optim::AdamOptions(cfg_.lr_peak).betas({cfg_.beta1, cfg_.beta2}));
}

StepLosses Trainer::compute_losses(const Batch& batch) {
  StepLosses out;
  out.prediction = nets_->depth(batch.day_target, batch.night_target);
  std::vector<Warped> day_recs;
  std::vector<Warped> night_recs;
  for (size_t j = 0; j < 2; ++j) {
    // Frames enter the pose net in temporal order; the backward motion is inverted.
    // Both halves of the pair share one camera, so one pose serves both domains.
    out.transforms[j] = j == 0 ? invert_rigid(pose_to_matrix(nets_->pose(batch.day_sources[0], batch.day_target)))
                               : pose_to_matrix(nets_->pose(batch.day_target, batch.day_sources[1]));
    out.day_reconstructions[j] =
        reproject(batch.day_sources[j], out.prediction.depth, out.transforms[j], batch.intrinsics);
    out.night_reconstructions[j] =
        reproject(batch.night_sources[j], out.prediction.depth, out.transforms[j], batch.intrinsics);
    day_recs.push_back(out.day_reconstructions[j]);
    night_recs.push_back(out.night_reconstructions[j]);
  }
  out.day = photometric_loss(batch.day_target, day_recs, cfg_.photometric);
  out.night = photometric_loss(batch.night_target, night_recs, cfg_.photometric);
  const auto finite = [](const torch::Tensor& t) { return std::isfinite(t.item<double>()); };
  if (!finite(out.day) || !finite(out.night)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << step_ << " (loss_day " << out.day.item<double>() << ", loss_night "
        << out.night.item<double>() << "); frames";
    for (auto f : batch.frame_indices) msg << ' ' << f;
    throw TrainingError(msg.str());
  }
  out.total = total_loss(out.day, out.night);
  if (cfg_.smoothness_weight > 0.0) {
    out.total = out.total + cfg_.smoothness_weight * edge_aware_smoothness(out.prediction.disparity, batch.day_target);
  }
  return out;
}

StepStats Trainer::train_step(const Batch& batch) {
  nets_->train();
  auto losses = compute_losses(batch);
  optimizer_->zero_grad();
  losses.total.backward();
  if (cfg_.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(nets_->parameters(), cfg_.grad_clip);

  StepStats stats;
  stats.step = step_;
  stats.lr = lr_at(static_cast<double>(step_), steps_per_epoch_, cfg_);
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(stats.lr);
  }
  optimizer_->step();
  ++step_;
  stats.loss = losses.total.item<double>();
  stats.loss_day = losses.day.item<double>();
  stats.loss_night = losses.night.item<double>();
  return stats;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.step = step_;
  ckpt.config = config_json(cfg_);
  for (const auto& item : nets_->named_parameters()) ckpt.tensors.emplace_back("param/" + item.key(), item.value());
  for (const auto& item : nets_->named_buffers()) ckpt.tensors.emplace_back("buffer/" + item.key(), item.value());
  const auto& state = optimizer_->state();
  for (const auto& item : nets_->named_parameters()) {
    const auto it = state.find(item.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    const auto base = "optim/" + item.key() + "/";
    ckpt.tensors.emplace_back(base + "step", torch::tensor(s.step(), torch::kInt64));
    ckpt.tensors.emplace_back(base + "exp_avg", s.exp_avg());
    ckpt.tensors.emplace_back(base + "exp_avg_sq", s.exp_avg_sq());
  }
  return ckpt;
}

void Trainer::save(const fs::path& path) const { save_checkpoint(path, checkpoint()); }

namespace {

std::string metrics_row(const StepStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%.9e,%.9g,%.9g,%.9g\n", static_cast<long long>(s.step), s.lr, s.loss,
                s.loss_day, s.loss_night);
  return buf;
}

constexpr const char* kMetricsHeader = "step,lr,loss,loss_day,loss_night\n";

// Keeps the rows of an earlier run that precede the resume point.
std::string metrics_prefix(const fs::path& path, int64_t before_step) {
  std::string kept = kMetricsHeader;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (std::stoll(line.substr(0, comma)) < before_step) kept += line + "\n";
    } catch (const std::logic_error&) {
      throw DataError("malformed metrics row in " + path.string() + ": " + line);
    }
  }
  return kept;
}

}  // namespace

FitResult fit(const TrainingConfig& cfg, const SequenceDataset& dataset, const fs::path& out_dir,
              const FitOptions& options) {
  cfg.validate();
  if (dataset.size() == 0) throw DataError("dataset " + dataset.dir().string() + " has no usable samples");
  // With no epochs to run only the initial checkpoint is written, so a short dataset is fine.
  const auto spe = std::max<int64_t>(static_cast<int64_t>(dataset.size()) / cfg.batch_size, cfg.epochs == 0 ? 1 : 0);
  if (spe == 0) {
    throw ConfigError("dataset has " + std::to_string(dataset.size()) + " samples, fewer than batch_size " +
                      std::to_string(cfg.batch_size));
  }
  fs::create_directories(out_dir);

  std::unique_ptr<Trainer> trainer;
  if (options.resume) {
    trainer = std::make_unique<Trainer>(load_checkpoint(*options.resume), spe);
  } else {
    trainer = std::make_unique<Trainer>(cfg, spe);
  }
  const auto& run = trainer->config();

  const auto metrics_path = out_dir / "metrics.csv";
  {
    const auto head = options.resume && fs::exists(metrics_path) ? metrics_prefix(metrics_path, trainer->step())
                                                                 : std::string(kMetricsHeader);
    write_file_atomically(metrics_path, head);
  }
  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw DataError("cannot write " + metrics_path.string());

  const int64_t total = run.epochs * spe;
  // Run limits come from the caller so a resumed run can be extended.
  const int64_t limit = cfg.max_steps >= 0 ? std::min(cfg.max_steps, total) : total;

  FitResult result;
  while (trainer->step() < limit) {
    const int64_t epoch = trainer->step() / spe;
    const auto offset = static_cast<size_t>(trainer->step() % spe);
    auto groups = epoch_batches(dataset.size(), run.batch_size, run.seed, epoch);
    const auto count = std::min(groups.size() - offset, static_cast<size_t>(limit - trainer->step()));
    std::vector<std::vector<size_t>> todo(groups.begin() + static_cast<std::ptrdiff_t>(offset),
                                          groups.begin() + static_cast<std::ptrdiff_t>(offset + count));
    BatchLoader loader(dataset, std::move(todo), cfg.workers);
    while (auto batch = loader.next()) {
      const auto stats = trainer->train_step(*batch);
      result.trace.push_back(stats);
      metrics << metrics_row(stats) << std::flush;
      if (options.on_step) options.on_step(stats);
      if (cfg.checkpoint_every > 0 && trainer->step() % cfg.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%06lld.ckpt", static_cast<long long>(trainer->step()));
        trainer->save(out_dir / name);
      }
    }
  }
  result.final_checkpoint = out_dir / "final.ckpt";
  trainer->save(result.final_checkpoint);
  return result;
}

}  // namespace allday
