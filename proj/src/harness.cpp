#include "twindelta/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "twindelta/error.hpp"
#include "twindelta/random.hpp"

namespace twindelta::harness {

namespace {

constexpr int kSuper = 4;  // supersamples per pixel axis
constexpr int kSamples = kSuper * kSuper;

bool inside(SpriteShape shape, double u, double v, double half) {
  switch (shape) {
    case SpriteShape::Square:
      return std::abs(u) <= half && std::abs(v) <= half;
    case SpriteShape::Disk:
      return u * u + v * v <= half * half;
    case SpriteShape::LShape:
      return std::abs(u) <= half && std::abs(v) <= half && !(u > 0 && v < 0);
  }
  return false;
}

double background_at(const BackgroundSpec& bg, int width, int x, int y, FrameIndex t) {
  switch (bg.kind) {
    case BackgroundKind::Flat:
      return bg.intensity;
    case BackgroundKind::Gradient:
      return width <= 1 ? bg.intensity
                        : bg.intensity + (bg.gradient_to - bg.intensity) * x / (width - 1);
    case BackgroundKind::Dynamic:
      if (x >= bg.tex_x0 && x < bg.tex_x1 && y >= bg.tex_y0 && y < bg.tex_y1) {
        const double phase =
            2.0 * std::numbers::pi * (x - bg.tex_speed_px * static_cast<double>(t)) /
            bg.tex_period_px;
        return bg.intensity + bg.tex_amplitude * std::sin(phase);
      }
      return bg.intensity;
  }
  return bg.intensity;
}

// Coverage counts (0..16) of one sprite over the whole frame.
std::vector<int> rasterize(const SceneObjectSpec& obj, const ObjectState2D& st, int width,
                           int height) {
  std::vector<int> cover(static_cast<std::size_t>(width) * height, 0);
  const double half = obj.size_px / 2.0;
  const double reach = half * std::numbers::sqrt2 + 1.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(st.x - reach)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(st.x + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(st.y - reach)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(st.y + reach)));
  const double rad = st.angle * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      int n = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper - st.x;
          const double py = y + (sy + 0.5) / kSuper - st.y;
          // Inverse rotation into sprite coordinates.
          const double u = c * px + s * py;
          const double v = -s * px + c * py;
          n += inside(obj.shape, u, v, half) ? 1 : 0;
        }
      }
      cover[static_cast<std::size_t>(y) * width + x] = n;
    }
  }
  return cover;
}

std::vector<std::pair<FrameIndex, FrameIndex>> motion_intervals(const ScenarioConfig& cfg) {
  std::vector<std::pair<FrameIndex, FrameIndex>> spans;
  for (const auto& obj : cfg.objects) {
    for (const auto& seg : obj.segments) spans.emplace_back(seg.start, seg.end);
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<FrameIndex, FrameIndex>> merged;
  for (const auto& sp : spans) {
    if (!merged.empty() && sp.first <= merged.back().second + 1) {
      merged.back().second = std::max(merged.back().second, sp.second);
    } else {
      merged.push_back(sp);
    }
  }
  return merged;
}

}  // namespace

std::string_view to_string(SpriteShape shape) {
  switch (shape) {
    case SpriteShape::Square: return "square";
    case SpriteShape::Disk: return "disk";
    case SpriteShape::LShape: return "l-shape";
  }
  return "square";
}

SpriteShape sprite_shape_from_string(std::string_view name) {
  if (name == "square") return SpriteShape::Square;
  if (name == "disk") return SpriteShape::Disk;
  if (name == "l-shape" || name == "lshape") return SpriteShape::LShape;
  throw Error(ErrorCode::InvalidConfig, "unknown sprite '" + std::string(name) + "'");
}

ObjectState2D object_state_at(const SceneObjectSpec& obj, FrameIndex frame) {
  ObjectState2D st{obj.x, obj.y, obj.angle};
  for (const auto& seg : obj.segments) {
    if (frame < seg.start) break;
    if (frame >= seg.end) {
      st = {seg.to_x, seg.to_y, seg.to_angle};
      continue;
    }
    const double a = static_cast<double>(frame - seg.start) /
                     static_cast<double>(seg.end - seg.start);
    st = {st.x + a * (seg.to_x - st.x), st.y + a * (seg.to_y - st.y),
          st.angle + a * (seg.to_angle - st.angle)};
    break;
  }
  return st;
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (width < 2 || height < 2) fail("frame size must be at least 2x2");
  if (length < 1) fail("length must be positive");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (background.kind == BackgroundKind::Dynamic &&
      (background.tex_x0 >= background.tex_x1 || background.tex_y0 >= background.tex_y1 ||
       background.tex_x0 < 0 || background.tex_y0 < 0 || background.tex_x1 > width ||
       background.tex_y1 > height || !(background.tex_period_px > 0))) {
    fail("dynamic background texture region invalid");
  }
  std::set<std::string> ids;
  for (const auto& obj : objects) {
    if (obj.object_id.empty()) fail("object_id must be non-empty");
    if (!ids.insert(obj.object_id).second) fail("duplicate object_id " + obj.object_id);
    if (!(obj.size_px > 0)) fail("sprite size must be positive");
    if (!(obj.intensity >= 0.0 && obj.intensity <= 1.0)) fail("sprite intensity outside [0,1]");
    const double half = obj.size_px / 2.0 * std::numbers::sqrt2;
    auto in_bounds = [&](double x, double y) {
      return x - half >= 0 && y - half >= 0 && x + half <= width && y + half <= height;
    };
    if (!in_bounds(obj.x, obj.y)) fail("object " + obj.object_id + " starts out of frame");
    FrameIndex prev_end = -1;
    for (const auto& seg : obj.segments) {
      if (seg.end <= seg.start) fail("segment end must follow start for " + obj.object_id);
      if (seg.start <= prev_end) fail("overlapping segments for " + obj.object_id);
      if (!in_bounds(seg.to_x, seg.to_y)) fail("trajectory leaves frame for " + obj.object_id);
      prev_end = seg.end;
    }
  }
}

const ObjectTruth* GroundTruth::find(FrameIndex frame, const std::string& object_id) const {
  if (frame < 0 || static_cast<std::size_t>(frame) >= frames.size()) return nullptr;
  for (const auto& o : frames[static_cast<std::size_t>(frame)].objects) {
    if (o.object_id == object_id) return &o;
  }
  return nullptr;
}

Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario out;
  out.truth.width = cfg.width;
  out.truth.height = cfg.height;
  out.truth.intervals = motion_intervals(cfg);
  out.truth.background_motion = Mask(cfg.width, cfg.height);
  if (cfg.background.kind == BackgroundKind::Dynamic) {
    for (int y = cfg.background.tex_y0; y < cfg.background.tex_y1; ++y) {
      for (int x = cfg.background.tex_x0; x < cfg.background.tex_x1; ++x) {
        out.truth.background_motion.set(x, y);
      }
    }
  }

  const auto npix = static_cast<std::size_t>(cfg.width) * cfg.height;
  out.frames.reserve(static_cast<std::size_t>(cfg.length));
  out.truth.frames.reserve(static_cast<std::size_t>(cfg.length));
  for (FrameIndex t = 0; t < cfg.length; ++t) {
    std::vector<double> px(npix);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        px[static_cast<std::size_t>(y) * cfg.width + x] =
            background_at(cfg.background, cfg.width, x, y, t);
      }
    }

    FrameTruth ft;
    ft.index = t;
    ft.occupancy = Mask(cfg.width, cfg.height);
    for (const auto& obj : cfg.objects) {
      const ObjectState2D st = object_state_at(obj, t);
      const std::vector<int> cover = rasterize(obj, st, cfg.width, cfg.height);
      int bx0 = cfg.width, by0 = cfg.height, bx1 = -1, by1 = -1;
      for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
          const auto i = static_cast<std::size_t>(y) * cfg.width + x;
          const int n = cover[i];
          if (n == 0) continue;
          const double a = static_cast<double>(n) / kSamples;
          px[i] = px[i] * (1.0 - a) + obj.intensity * a;
          if (2 * n >= kSamples) ft.occupancy.bits[i] = 1;
          bx0 = std::min(bx0, x);
          by0 = std::min(by0, y);
          bx1 = std::max(bx1, x);
          by1 = std::max(by1, y);
        }
      }
      ObjectTruth ot;
      ot.object_id = obj.object_id;
      ot.label = obj.label.empty() ? obj.object_id : obj.label;
      if (bx1 >= 0) {
        ot.bbox = BoundingBox{static_cast<double>(bx0), static_cast<double>(by0),
                              static_cast<double>(bx1 + 1), static_cast<double>(by1 + 1)};
      }
      ot.pose = normalize_pose(obj.base_pose.azimuth(), obj.base_pose.elevation(),
                               obj.base_pose.inplane() + st.angle);
      ft.objects.push_back(std::move(ot));
    }

    const double light =
        (cfg.lighting_step && t >= cfg.lighting_step->frame) ? cfg.lighting_step->delta : 0.0;
    if (cfg.noise_sigma > 0.0) {
      NormalStream noise(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
      for (double& v : px) v = std::clamp(v + light + cfg.noise_sigma * noise.next(), 0.0, 1.0);
    } else {
      for (double& v : px) v = std::clamp(v + light, 0.0, 1.0);
    }

    out.frames.emplace_back(cfg.width, cfg.height, std::move(px), t);
    out.truth.frames.push_back(std::move(ft));
  }
  return out;
}

std::vector<std::string> preset_names() {
  return {"baseline", "static", "dynamic_background", "lighting_step", "monochrome",
          "two_episodes"};
}

ScenarioConfig preset(std::string_view name, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.width = 64;
  cfg.height = 64;
  cfg.length = 60;
  cfg.noise_sigma = 0.01;
  cfg.background.kind = BackgroundKind::Flat;
  cfg.background.intensity = 0.2;

  SceneObjectSpec cube;
  cube.object_id = "cube";
  cube.label = "cube";
  cube.shape = SpriteShape::Square;
  cube.intensity = 0.45;
  cube.size_px = 13;
  cube.x = 29;
  cube.y = 36;
  cube.base_pose = normalize_pose(30, 15, 0);
  cube.segments = {TrajectorySegment{20, 40, 41, 36, 90}};

  if (name == "baseline") {
    cfg.objects = {cube};
  } else if (name == "static") {
    cube.segments.clear();
    cfg.objects = {cube};
  } else if (name == "dynamic_background") {
    cfg.objects = {cube};
    cfg.background.kind = BackgroundKind::Dynamic;
    cfg.background.tex_x0 = 0;
    cfg.background.tex_x1 = 64;
    cfg.background.tex_y0 = 0;
    cfg.background.tex_y1 = 16;
    cfg.background.tex_period_px = 16.0;
  } else if (name == "lighting_step") {
    cube.segments.clear();
    cfg.objects = {cube};
    cfg.lighting_step = LightingStep{30, 0.25};
  } else if (name == "monochrome") {
    cube.intensity = cfg.background.intensity;
    cfg.objects = {cube};
    cfg.noise_sigma = 0.0;
  } else if (name == "two_episodes") {
    cfg.length = 160;
    cube.segments = {TrajectorySegment{20, 40, 41, 36, 90},
                     TrajectorySegment{101, 121, 29, 36, 135}};
    cfg.objects = {cube};
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown preset '" + std::string(name) + "'");
  }
  return cfg;
}

}  // namespace twindelta::harness
