#pragma once

// Deterministic synthetic scenes with full ground truth: procedural sprites on
// a configurable background, piecewise-stationary trajectories, optional
// disturbances (drifting background texture, lighting step, monochrome
// sprites) and per-pixel Gaussian noise.
//
// Rasterisation uses a fixed 4x4 supersampling grid per pixel; a pixel's
// coverage is (samples inside)/16 and its value blends background and sprite
// intensity by that coverage. Truth masks mark coverage >= 1/2.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twindelta/scene.hpp"

namespace twindelta::harness {

enum class SpriteShape { Square, Disk, LShape };

std::string_view to_string(SpriteShape shape);
SpriteShape sprite_shape_from_string(std::string_view name);

/// Linear move of centre and in-plane angle over [start, end] (inclusive).
struct TrajectorySegment {
  FrameIndex start = 0;
  FrameIndex end = 0;
  double to_x = 0;
  double to_y = 0;
  double to_angle = 0;  // degrees, screen-clockwise (image y points down)
};

struct SceneObjectSpec {
  std::string object_id;
  std::string label;
  SpriteShape shape = SpriteShape::Square;
  double intensity = 0.8;
  double size_px = 13;  // square side / disk diameter
  double x = 0;         // initial centre
  double y = 0;
  double angle = 0;     // initial in-plane offset, degrees
  Pose base_pose;       // pose at zero in-plane offset
  std::vector<TrajectorySegment> segments;
};

enum class BackgroundKind { Flat, Gradient, Dynamic };

struct BackgroundSpec {
  BackgroundKind kind = BackgroundKind::Flat;
  double intensity = 0.2;       // flat level, gradient left edge, dynamic base
  double gradient_to = 0.4;     // gradient right edge
  // Drifting sinusoidal texture inside [tex_x0,tex_x1) x [tex_y0,tex_y1).
  int tex_x0 = 0, tex_y0 = 0, tex_x1 = 0, tex_y1 = 0;
  double tex_amplitude = 0.15;
  double tex_period_px = 8.0;
  double tex_speed_px = 1.0;    // per frame
};

struct LightingStep {
  FrameIndex frame = 0;
  double delta = 0;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int width = 64;
  int height = 64;
  int length = 60;
  BackgroundSpec background;
  std::vector<SceneObjectSpec> objects;
  std::optional<LightingStep> lighting_step;
  double noise_sigma = 0.01;

  /// Throws InvalidConfig.
  void validate() const;
};

struct ObjectTruth {
  std::string object_id;
  std::string label;
  BoundingBox bbox;
  Pose pose;
};

struct FrameTruth {
  FrameIndex index = 0;
  std::vector<ObjectTruth> objects;
  Mask occupancy;  // union of sprite masks, coverage >= 1/2
};

struct GroundTruth {
  int width = 0;
  int height = 0;
  std::vector<std::pair<FrameIndex, FrameIndex>> intervals;
  std::vector<FrameTruth> frames;
  Mask background_motion;  // pixels of the drifting texture region (empty mask otherwise)

  const ObjectTruth* find(FrameIndex frame, const std::string& object_id) const;
};

struct Scenario {
  std::vector<GrayFrame> frames;
  GroundTruth truth;
};

Scenario generate(const ScenarioConfig& config);

/// Object centre and angle at a frame (holds the last reached state between segments).
struct ObjectState2D {
  double x, y, angle;
};
ObjectState2D object_state_at(const SceneObjectSpec& obj, FrameIndex frame);

/// Named presets: baseline, static, dynamic_background, lighting_step,
/// monochrome, two_episodes. Throws InvalidConfig for unknown names.
ScenarioConfig preset(std::string_view name, std::uint64_t seed = 1);
std::vector<std::string> preset_names();

}  // namespace twindelta::harness
