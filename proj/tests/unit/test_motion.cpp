#include <gtest/gtest.h>

#include "twindelta/error.hpp"
#include "twindelta/harness.hpp"
#include "twindelta/motion.hpp"

using namespace twindelta;
using namespace twindelta::motion;

namespace {

std::vector<GrayFrame> constant_stream(int n, int w = 64, int h = 64, double v = 0.3) {
  std::vector<GrayFrame> frames;
  for (int i = 0; i < n; ++i) frames.push_back(GrayFrame::filled(w, h, v, i));
  return frames;
}

std::vector<GrayFrame> rescaled(std::span<const GrayFrame> frames, double factor) {
  std::vector<GrayFrame> out;
  for (const auto& f : frames) out.push_back(downscale(f, factor));
  return out;
}

}  // namespace

TEST(Preprocess, WhiteImage) {
  const GrayFrame g = preprocess(RgbImage::filled(8, 8, 1, 1, 1), 0.25);
  ASSERT_EQ(g.width(), 2);
  ASSERT_EQ(g.height(), 2);
  for (double v : g.pixels()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Preprocess, RedLuma) {
  const GrayFrame g = luma(RgbImage::filled(1, 1, 1, 0, 0));
  EXPECT_DOUBLE_EQ(g.at(0, 0), 0.299);
}

TEST(Preprocess, HalfSplitBoxAverage) {
  std::vector<double> px(16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) px[static_cast<std::size_t>(y * 4 + x)] = x < 2 ? 0.0 : 1.0;
  const GrayFrame d = downscale(GrayFrame(4, 4, px), 0.5);
  ASSERT_EQ(d.width(), 2);
  EXPECT_DOUBLE_EQ(d.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(d.at(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(d.at(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(d.at(1, 1), 1.0);
}

TEST(Preprocess, Errors) {
  try {
    preprocess(RgbImage{}, 0.25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyImage);
  }
}

TEST(Config, Validation) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.window_stride = 40;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.motion_pixel_fraction = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.window_len = 1;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(WindowScore, StaticWindowIsZero) {
  const auto frames = rescaled(constant_stream(30), 0.25);
  EXPECT_EQ(window_motion_score(frames, PipelineConfig{}), 0.0);
}

TEST(WindowScore, SingleFrameIsTooFew) {
  const auto frames = rescaled(constant_stream(1), 0.25);
  try {
    window_motion_score(frames, PipelineConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewFrames);
  }
}

TEST(WindowScore, MovingSquareInRange) {
  const auto sc = harness::generate(harness::preset("baseline", 1));
  const std::span<const GrayFrame> all(sc.frames);
  const auto window = rescaled(all.subspan(11, 30), 0.25);
  const double score = window_motion_score(window, PipelineConfig{});
  EXPECT_GE(score, 0.01);
  EXPECT_LE(score, 0.10);
}

TEST(Segment, BaselineOneInterval) {
  const auto sc = harness::generate(harness::preset("baseline", 1));
  const PipelineConfig cfg;
  const auto intervals = segment_stream(sc.frames, cfg);
  ASSERT_EQ(intervals.size(), 1u);
  EXPECT_LE(std::abs(intervals[0].t1 - 20), cfg.window_len);
  EXPECT_LE(std::abs(intervals[0].t2 - 40), cfg.window_len);
  EXPECT_EQ(intervals[0].last_frame.index(), intervals[0].t2);
  EXPECT_EQ(intervals[0].last_frame.width(), 64);
}

TEST(Segment, StaticStreamIsEmpty) {
  EXPECT_TRUE(segment_stream(constant_stream(60), PipelineConfig{}).empty());
}

TEST(Segment, StaticStreamEmptyForAnyConfig) {
  const auto frames = constant_stream(50, 32, 32, 0.6);
  for (int len : {2, 5, 10, 25}) {
    for (double frac : {1e-4, 0.01, 0.3}) {
      PipelineConfig cfg;
      cfg.window_len = len;
      cfg.window_stride = std::max(1, len / 2);
      cfg.motion_pixel_fraction = frac;
      cfg.rescale_factor = 0.5;
      EXPECT_TRUE(segment_stream(frames, cfg).empty()) << len << " " << frac;
    }
  }
}

TEST(Segment, TwoSeparatedEpisodes) {
  const auto cfg_scene = harness::preset("two_episodes", 1);
  const auto sc = harness::generate(cfg_scene);
  ASSERT_EQ(sc.truth.intervals.size(), 2u);
  const PipelineConfig cfg;
  EXPECT_GE(sc.truth.intervals[1].first - sc.truth.intervals[0].second, 2 * cfg.window_len);
  const auto intervals = segment_stream(sc.frames, cfg);
  ASSERT_EQ(intervals.size(), 2u);
  EXPECT_LT(intervals[0].t2, intervals[1].t1);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(std::abs(intervals[i].t1 - sc.truth.intervals[i].first), cfg.window_len);
    EXPECT_LE(std::abs(intervals[i].t2 - sc.truth.intervals[i].second), cfg.window_len);
  }
}

TEST(Segment, DeterministicAndBoundedRetention) {
  const auto sc = harness::generate(harness::preset("two_episodes", 4));
  const PipelineConfig cfg;
  MotionSegmenter seg(cfg);
  std::vector<MotionInterval> streamed;
  for (const auto& f : sc.frames) {
    for (auto& iv : seg.push(f)) streamed.push_back(std::move(iv));
    EXPECT_LE(seg.retained_full_frames(), 1u);
  }
  for (auto& iv : seg.finish()) streamed.push_back(std::move(iv));

  const auto again = segment_stream(sc.frames, cfg);
  ASSERT_EQ(streamed.size(), again.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(streamed[i].t1, again[i].t1);
    EXPECT_EQ(streamed[i].t2, again[i].t2);
    EXPECT_EQ(streamed[i].score_trace, again[i].score_trace);
    EXPECT_EQ(streamed[i].last_frame, again[i].last_frame);
  }
}

TEST(Segment, OutOfOrderFrameRejected) {
  MotionSegmenter seg(PipelineConfig{});
  seg.push(GrayFrame::filled(8, 8, 0.1, 5));
  EXPECT_THROW(seg.push(GrayFrame::filled(8, 8, 0.1, 3)), Error);
}

TEST(Segment, LightingGuardFlagsStep) {
  const auto sc = harness::generate(harness::preset("lighting_step", 1));
  PipelineConfig cfg;
  cfg.lighting_guard = true;
  std::vector<WindowRecord> windows;
  const auto intervals = segment_stream(sc.frames, cfg, &windows);
  bool flagged = false;
  for (const auto& w : windows) flagged = flagged || w.lighting_suspect;
  EXPECT_TRUE(flagged);
}
