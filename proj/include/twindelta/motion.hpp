#pragma once

// Streaming motion front end: luma + area downscale, windowed DMD foreground
// scoring, and interval segmentation that keeps only the last frame of each
// motion episode.

#include <optional>
#include <span>
#include <vector>

#include "twindelta/dmd.hpp"
#include "twindelta/image_io.hpp"
#include "twindelta/scene.hpp"

namespace twindelta::motion {

struct PipelineConfig {
  double rescale_factor = 0.25;
  int window_len = 30;
  int window_stride = 15;
  double motion_pixel_fraction = 0.005;
  double mask_threshold = 0.1;
  int quiescent_windows_to_close = 2;

  double energy_threshold = dmd::kDefaultEnergy;
  double mode_epsilon = dmd::kDefaultModeEpsilon;
  std::optional<int> background_step;  // default: window midpoint

  bool lighting_guard = false;
  double lighting_jump = 0.2;

  /// Throws InvalidConfig.
  void validate() const;
};

/// ITU-R BT.601 luma of each pixel.
GrayFrame luma(const RgbImage& image, FrameIndex index = 0);

/// Area-average downscale to floor(dim * factor) (minimum 1) per axis.
GrayFrame downscale(const GrayFrame& frame, double factor);

/// luma followed by downscale. Throws EmptyImage.
GrayFrame preprocess(const RgbImage& image, double rescale_factor, FrameIndex index = 0);

struct WindowAnalysis {
  double score = 0;             // fraction of mask pixels set on the last frame
  bool lighting_suspect = false;
  int rank = 0;
  GrayFrame background;
  std::vector<double> residual;
  Mask mask;
};

/// DMD over an already-preprocessed window; mask on the window's last frame.
WindowAnalysis analyze_window(std::span<const GrayFrame> window, const PipelineConfig& cfg);
double window_motion_score(std::span<const GrayFrame> window, const PipelineConfig& cfg);

struct MotionInterval {
  FrameIndex t1 = 0;
  FrameIndex t2 = 0;
  GrayFrame last_frame;             // full resolution, index == t2
  std::vector<double> score_trace;  // scores of the windows seen while open
};

struct WindowRecord {
  FrameIndex end = 0;
  double score = 0;
  bool lighting_suspect = false;
  bool motion = false;
};

/// Incremental segmentation; feed frames in index order.
class MotionSegmenter {
 public:
  explicit MotionSegmenter(PipelineConfig cfg);

  /// Returns intervals closed by this frame (usually none).
  std::vector<MotionInterval> push(const GrayFrame& frame);
  /// Flushes a trailing window and any still-open interval.
  std::vector<MotionInterval> finish();

  const std::vector<WindowRecord>& windows() const noexcept { return windows_; }
  /// Full-resolution frames currently held (0 or 1).
  std::size_t retained_full_frames() const noexcept { return open_ ? 1 : 0; }
  FrameIndex frames_seen() const noexcept { return seen_; }

 private:
  void evaluate(const GrayFrame& full, std::vector<MotionInterval>& out);

  PipelineConfig cfg_;
  std::vector<GrayFrame> window_;  // rescaled, ring of window_len
  std::optional<GrayFrame> last_full_;
  FrameIndex seen_ = 0;
  FrameIndex last_evaluated_end_ = -1;
  std::vector<WindowRecord> windows_;

  bool open_ = false;
  MotionInterval current_;
  int quiet_ = 0;
};

std::vector<MotionInterval> segment_stream(FrameSource& source, const PipelineConfig& cfg,
                                           std::vector<WindowRecord>* windows = nullptr);
std::vector<MotionInterval> segment_stream(std::span<const GrayFrame> frames,
                                           const PipelineConfig& cfg,
                                           std::vector<WindowRecord>* windows = nullptr);

}  // namespace twindelta::motion
