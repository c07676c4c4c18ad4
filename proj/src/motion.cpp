#include "twindelta/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "twindelta/error.hpp"

namespace twindelta::motion {

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (!(rescale_factor > 0.0 && rescale_factor <= 1.0)) fail("rescale_factor must lie in (0,1]");
  if (window_len < 2) fail("window_len must be >= 2");
  if (window_stride < 1 || window_stride > window_len) {
    fail("window_stride must lie in [1, window_len]");
  }
  if (!(motion_pixel_fraction > 0.0 && motion_pixel_fraction < 1.0)) {
    fail("motion_pixel_fraction must lie in (0,1)");
  }
  if (!(mask_threshold > 0.0 && mask_threshold < 1.0)) fail("mask_threshold must lie in (0,1)");
  if (quiescent_windows_to_close < 1) fail("quiescent_windows_to_close must be >= 1");
  if (!(energy_threshold > 0.0 && energy_threshold <= 1.0)) {
    fail("energy_threshold must lie in (0,1]");
  }
  if (!(mode_epsilon > 0.0)) fail("mode_epsilon must be > 0");
  if (background_step && (*background_step < 0 || *background_step >= window_len)) {
    fail("background_step must lie in [0, window_len)");
  }
}

GrayFrame luma(const RgbImage& image, FrameIndex index) {
  if (image.empty()) throw Error(ErrorCode::EmptyImage, "RGB image has no pixels");
  const auto n = static_cast<std::size_t>(image.width) * image.height;
  if (image.rgb.size() != 3 * n) {
    throw Error(ErrorCode::InvalidFrame, "RGB buffer size does not match dimensions");
  }
  std::vector<double> px(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = 0.299 * image.rgb[3 * i] + 0.587 * image.rgb[3 * i + 1] +
                     0.114 * image.rgb[3 * i + 2];
    px[i] = std::clamp(v, 0.0, 1.0);
  }
  return GrayFrame(image.width, image.height, std::move(px), index);
}

namespace {

struct Tap {
  int source;
  double weight;
};

// For each output cell, the source cells it overlaps and their area shares.
std::vector<std::vector<Tap>> box_taps(int src, int dst) {
  const double scale = static_cast<double>(src) / dst;
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(dst));
  for (int i = 0; i < dst; ++i) {
    const double lo = i * scale;
    const double hi = (i + 1) * scale;
    for (int j = static_cast<int>(std::floor(lo)); j < src && j < hi; ++j) {
      const double overlap = std::min(hi, j + 1.0) - std::max(lo, static_cast<double>(j));
      if (overlap > 0) taps[static_cast<std::size_t>(i)].push_back({j, overlap / scale});
    }
  }
  return taps;
}

}  // namespace

GrayFrame downscale(const GrayFrame& frame, double factor) {
  if (frame.empty()) throw Error(ErrorCode::EmptyImage, "frame has no pixels");
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "rescale factor must lie in (0,1]");
  }
  const int w = frame.width();
  const int h = frame.height();
  const int ow = std::max(1, static_cast<int>(std::floor(w * factor + 1e-9)));
  const int oh = std::max(1, static_cast<int>(std::floor(h * factor + 1e-9)));
  if (ow == w && oh == h) return frame;

  const auto tx = box_taps(w, ow);
  const auto ty = box_taps(h, oh);
  std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (const Tap& t : tx[static_cast<std::size_t>(x)]) acc += t.weight * frame.at(t.source, y);
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (const Tap& t : ty[static_cast<std::size_t>(y)]) {
        acc += t.weight * rows[static_cast<std::size_t>(t.source) * ow + x];
      }
      out[static_cast<std::size_t>(y) * ow + x] = std::clamp(acc, 0.0, 1.0);
    }
  }
  return GrayFrame(ow, oh, std::move(out), frame.index());
}

GrayFrame preprocess(const RgbImage& image, double rescale_factor, FrameIndex index) {
  return downscale(luma(image, index), rescale_factor);
}

namespace {

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  const double mu = mean(v);
  double acc = 0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

bool all_zero(std::span<const GrayFrame> window) {
  for (const auto& f : window) {
    for (double v : f.pixels()) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

WindowAnalysis analyze_window(std::span<const GrayFrame> window, const PipelineConfig& cfg) {
  const auto snapshots = dmd::build_snapshots(window);
  const GrayFrame& last = window.back();
  WindowAnalysis out;
  if (all_zero(window)) {
    // Nothing to decompose; a black stream is trivially static.
    out.background = GrayFrame::filled(last.width(), last.height(), 0.0, last.index());
    out.residual.assign(last.size(), 0.0);
    out.mask = Mask(last.width(), last.height());
    return out;
  }
  const auto model = dmd::compute_dmd(snapshots, dmd::EnergyThreshold{cfg.energy_threshold});
  const auto partition = dmd::classify_modes(model, cfg.mode_epsilon);
  const int m = static_cast<int>(window.size());
  const int k = cfg.background_step.value_or((m - 1) / 2);
  out.rank = model.rank;
  out.background =
      dmd::background_frame(model, partition, k, last.width(), last.height(), last.index());
  out.residual = dmd::foreground_residual(last, out.background);
  out.mask = dmd::foreground_mask(out.residual, last.width(), last.height(), cfg.mask_threshold);
  out.score = out.mask.fraction();

  if (cfg.lighting_guard) {
    double max_jump = 0;
    for (std::size_t i = 1; i < window.size(); ++i) {
      max_jump = std::max(max_jump,
                          std::abs(mean(window[i].pixels()) - mean(window[i - 1].pixels())));
    }
    out.lighting_suspect =
        max_jump > cfg.lighting_jump && variance(out.residual) < cfg.mask_threshold;
  }
  return out;
}

double window_motion_score(std::span<const GrayFrame> window, const PipelineConfig& cfg) {
  return analyze_window(window, cfg).score;
}

MotionSegmenter::MotionSegmenter(PipelineConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<MotionInterval> MotionSegmenter::push(const GrayFrame& frame) {
  if (last_full_ && frame.index() <= last_full_->index()) {
    throw Error(ErrorCode::InvalidArgument, "frames must arrive in increasing index order");
  }
  if (last_full_ && !frame.same_shape(*last_full_)) {
    throw Error(ErrorCode::DimensionMismatch, "frame size changed mid-stream");
  }
  window_.push_back(downscale(frame, cfg_.rescale_factor));
  if (window_.size() > static_cast<std::size_t>(cfg_.window_len)) window_.erase(window_.begin());
  last_full_ = frame;
  ++seen_;

  std::vector<MotionInterval> out;
  if (seen_ >= cfg_.window_len && (seen_ - cfg_.window_len) % cfg_.window_stride == 0) {
    evaluate(frame, out);
  }
  return out;
}

std::vector<MotionInterval> MotionSegmenter::finish() {
  std::vector<MotionInterval> out;
  if (last_full_ && seen_ >= cfg_.window_len && last_evaluated_end_ != last_full_->index()) {
    evaluate(*last_full_, out);
  }
  if (open_) {
    out.push_back(std::move(current_));
    current_ = {};
    open_ = false;
  }
  last_full_.reset();
  return out;
}

void MotionSegmenter::evaluate(const GrayFrame& full, std::vector<MotionInterval>& out) {
  const WindowAnalysis a = analyze_window(window_, cfg_);
  last_evaluated_end_ = full.index();
  const bool motion = !a.lighting_suspect && a.score >= cfg_.motion_pixel_fraction;
  windows_.push_back({full.index(), a.score, a.lighting_suspect, motion});

  if (motion) {
    if (!open_) {
      open_ = true;
      current_ = {};
      current_.t1 = full.index();
    }
    current_.t2 = full.index();
    current_.last_frame = full;
    current_.score_trace.push_back(a.score);
    quiet_ = 0;
    return;
  }
  if (!open_) return;
  current_.score_trace.push_back(a.score);
  if (++quiet_ >= cfg_.quiescent_windows_to_close) {
    out.push_back(std::move(current_));
    current_ = {};
    open_ = false;
    quiet_ = 0;
  }
}

std::vector<MotionInterval> segment_stream(FrameSource& source, const PipelineConfig& cfg,
                                           std::vector<WindowRecord>* windows) {
  MotionSegmenter seg(cfg);
  std::vector<MotionInterval> out;
  while (auto frame = source.next()) {
    for (auto& iv : seg.push(*frame)) out.push_back(std::move(iv));
  }
  for (auto& iv : seg.finish()) out.push_back(std::move(iv));
  if (windows) *windows = seg.windows();
  return out;
}

std::vector<MotionInterval> segment_stream(std::span<const GrayFrame> frames,
                                           const PipelineConfig& cfg,
                                           std::vector<WindowRecord>* windows) {
  VectorSource source(frames);
  return segment_stream(source, cfg, windows);
}

}  // namespace twindelta::motion
