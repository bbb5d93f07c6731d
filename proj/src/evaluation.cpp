#include "allday/evaluation.hpp"

#include "allday/errors.hpp"
#include "allday/image_io.hpp"
#include "allday/random.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace allday {

namespace fs = std::filesystem;

torch::Tensor valid_depth_mask(const torch::Tensor& gt, const torch::Tensor& mask, double cap, double floor) {
  return mask.to(torch::kBool) & (gt > floor) & (gt <= cap);
}

EvalMetrics compute_metrics(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& mask,
                            double cap, double floor) {
  TORCH_CHECK(pred.sizes() == gt.sizes() && gt.sizes() == mask.sizes(), "pred ", pred.sizes(), ", gt ", gt.sizes(),
              " and mask ", mask.sizes(), " must match");
  if (!(cap > floor)) throw EvaluationError("depth cap must exceed the floor");
  const auto valid = valid_depth_mask(gt, mask, cap, floor);
  const auto g = gt.to(torch::kFloat64).masked_select(valid);
  if (g.numel() == 0) throw EvaluationError("no valid ground-truth pixels");
  const auto p = pred.to(torch::kFloat64).masked_select(valid).clamp(floor, cap);

  const auto diff = p - g;
  const auto ratio = torch::max(p / g, g / p);
  const auto log_diff = p.log() - g.log();
  EvalMetrics m;
  m.abs_rel = (diff.abs() / g).mean().item<double>();
  m.sq_rel = (diff.square() / g).mean().item<double>();
  m.rmse = std::sqrt(diff.square().mean().item<double>());
  m.rmse_log = std::sqrt(log_diff.square().mean().item<double>());
  m.a1 = (ratio < 1.25).to(torch::kFloat64).mean().item<double>();
  m.a2 = (ratio < 1.25 * 1.25).to(torch::kFloat64).mean().item<double>();
  m.a3 = (ratio < 1.25 * 1.25 * 1.25).to(torch::kFloat64).mean().item<double>();
  return m;
}

torch::Tensor median_scale(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid) {
  const auto v = valid.to(torch::kBool);
  if (!v.any().item<bool>()) throw EvaluationError("median scaling needs at least one valid pixel");
  const double mg = gt.to(torch::kFloat64).masked_select(v).median().item<double>();
  const double mp = pred.to(torch::kFloat64).masked_select(v).median().item<double>();
  if (mp == 0.0) throw EvaluationError("prediction median is zero");
  return (pred.to(torch::kFloat64) * (mg / mp)).to(pred.scalar_type());
}

torch::Tensor sparse_mask(int64_t height, int64_t width, double density, uint64_t seed, int64_t frame) {
  if (density >= 1.0) return torch::ones({height, width}, torch::kBool);
  if (!(density > 0.0)) throw EvaluationError("ground-truth density must be in (0, 1]");
  auto gen = at::make_generator<at::CPUGeneratorImpl>(mix_seed(seed ^ 0x5eedULL, static_cast<uint64_t>(frame)));
  return torch::rand({height, width}, gen, torch::kFloat64) < density;
}

const SplitReport* EvalReport::find(const std::string& name) const {
  for (const auto& s : splits) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

torch::Tensor predict_depth(DepthModel& model, const torch::Tensor& day, const torch::Tensor& night, int64_t height,
                            int64_t width) {
  torch::NoGradGuard no_grad;
  model->eval();
  auto depth = model(day.unsqueeze(0), night.unsqueeze(0)).depth;
  depth = torch::nn::functional::interpolate(depth, torch::nn::functional::InterpolateFuncOptions()
                                                        .size(std::vector<int64_t>{height, width})
                                                        .mode(torch::kBilinear)
                                                        .align_corners(false));
  return depth[0][0].contiguous();
}

namespace {

void accumulate(EvalMetrics& sum, const EvalMetrics& m) {
  sum.abs_rel += m.abs_rel;
  sum.sq_rel += m.sq_rel;
  sum.rmse += m.rmse;
  sum.rmse_log += m.rmse_log;
  sum.a1 += m.a1;
  sum.a2 += m.a2;
  sum.a3 += m.a3;
}

EvalMetrics divided(EvalMetrics m, double n) {
  for (double* v : {&m.abs_rel, &m.sq_rel, &m.rmse, &m.rmse_log, &m.a1, &m.a2, &m.a3}) *v /= n;
  return m;
}

SplitReport run_split(DepthModel& model, const SequenceDataset& dataset, const EvalOptions& options, bool night) {
  SplitReport split;
  split.name = night ? "night" : "day";
  EvalMetrics sum;
  for (auto frame : dataset.frames()) {
    if (!dataset.has_depth(frame)) continue;
    FrameResult fr;
    fr.frame = frame;
    try {
      const auto gt = dataset.ground_truth_depth(frame);
      auto [day, night_img] = dataset.pair(frame);
      if (night) day = approximate_day_from_night(night_img);
      auto pred = predict_depth(model, day, night_img, gt.size(0), gt.size(1));
      const auto mask = sparse_mask(gt.size(0), gt.size(1), options.density, options.seed, frame);
      if (options.median_scaling) pred = median_scale(pred, gt, valid_depth_mask(gt, mask, options.cap));
      fr.metrics = compute_metrics(pred, gt, mask, options.cap);
      fr.ok = true;
      if (options.depth_png_dir) {
        fs::create_directories(*options.depth_png_dir);
        write_png(*options.depth_png_dir / (split.name + "_" + frame_name(frame, ".png")), colorize_depth(pred));
      }
    } catch (const EvaluationError& e) {
      fr.error = e.what();
    }
    if (fr.ok) {
      accumulate(sum, fr.metrics);
      ++split.evaluated;
    } else {
      ++split.skipped;
    }
    split.frames.push_back(std::move(fr));
  }
  if (split.evaluated == 0) {
    throw EvaluationError("no frame of " + dataset.dir().string() + " could be evaluated on the " + split.name +
                          " split");
  }
  split.mean = divided(sum, static_cast<double>(split.evaluated));
  return split;
}

std::string metric_fields(const EvalMetrics& m) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.a1,
                m.a2, m.a3);
  return buf;
}

}  // namespace

EvalReport evaluate(DepthModel& model, const SequenceDataset& dataset, const EvalOptions& options) {
  EvalReport report;
  if (options.day) report.splits.push_back(run_split(model, dataset, options, false));
  if (options.night) report.splits.push_back(run_split(model, dataset, options, true));
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "split,frame,status,abs_rel,sq_rel,rmse,rmse_log,a1,a2,a3\n";
  for (const auto& s : report.splits) {
    for (const auto& f : s.frames) {
      out << s.name << ',' << frame_name(f.frame, "") << ',';
      if (f.ok) {
        out << "ok," << metric_fields(f.metrics) << '\n';
      } else {
        out << "skipped,,,,,,,\n";
      }
    }
    out << s.name << ",mean," << s.evaluated << "/" << (s.evaluated + s.skipped) << ',' << metric_fields(s.mean)
        << '\n';
  }
  return out.str();
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof line, "%-6s %7s %8s %8s %8s %8s %7s %7s %7s\n", "split", "frames", "AbsRel", "SqRel",
                "RMSE", "RMSElog", "d<1.25", "d<1.25^2", "d<1.25^3");
  out << line;
  for (const auto& s : report.splits) {
    const auto& m = s.mean;
    std::snprintf(line, sizeof line, "%-6s %7zu %8.4f %8.4f %8.4f %8.4f %7.4f %8.4f %8.4f\n", s.name.c_str(),
                  s.evaluated, m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.a1, m.a2, m.a3);
    out << line;
    if (s.skipped > 0) out << "  (" << s.skipped << " " << s.name << " frames skipped: no valid ground truth)\n";
  }
  return out.str();
}

}  // namespace allday
