#pragma once

// Shared value types: frames, masks, boxes, detections, poses, change events
// and the replayable scene state.

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace twindelta {

using FrameIndex = std::int64_t;

/// Grayscale frame with row-major intensities in [0,1].
class GrayFrame {
 public:
  GrayFrame() = default;
  GrayFrame(int width, int height, std::vector<double> pixels, FrameIndex index = 0);

  /// Frame filled with a single intensity.
  static GrayFrame filled(int width, int height, double value, FrameIndex index = 0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  FrameIndex index() const noexcept { return index_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  GrayFrame with_index(FrameIndex index) const;
  bool same_shape(const GrayFrame& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const GrayFrame&, const GrayFrame&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
  FrameIndex index_ = 0;
};

/// Binary per-pixel mask, row-major.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const noexcept;
  double fraction() const noexcept;

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Intersection over union of two equally sized masks. Two empty masks give 1.
double mask_iou(const Mask& a, const Mask& b);

/// Axis-aligned box in pixel coordinates, half-open on the max side.
struct BoundingBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept;
  bool well_formed() const noexcept { return x_min < x_max && y_min < y_max; }
  bool within(int frame_width, int frame_height) const noexcept;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

struct Detection {
  std::string label;
  BoundingBox bbox;
  double confidence = 0;
};

/// Fixed set of class labels a detector may emit.
class ClassRegistry {
 public:
  ClassRegistry() = default;
  explicit ClassRegistry(std::set<std::string> labels) : labels_(std::move(labels)) {}

  bool contains(const std::string& label) const { return labels_.contains(label); }
  void add(std::string label) { labels_.insert(std::move(label)); }
  const std::set<std::string>& labels() const noexcept { return labels_; }

  /// Throws InvalidArgument if the detection breaks box, confidence or label rules.
  void validate(const Detection& d, int frame_width, int frame_height) const;

 private:
  std::set<std::string> labels_;
};

// Canonical angle wraps (degrees).
double wrap_azimuth(double deg);   // [0, 360)
double wrap_inplane(double deg);   // [-180, 180)
double wrap_delta(double deg);     // (-180, 180]

/// Camera Euler angles relative to the object frame, in canonical ranges:
/// azimuth [0,360), elevation [-90,90], in-plane [-180,180).
class Pose {
 public:
  Pose() = default;

  double azimuth() const noexcept { return azimuth_; }
  double elevation() const noexcept { return elevation_; }
  double inplane() const noexcept { return inplane_; }

  friend bool operator==(const Pose&, const Pose&) = default;
  friend Pose normalize_pose(double raw_azimuth, double raw_elevation, double raw_inplane);

 private:
  Pose(double az, double el, double ip) : azimuth_(az), elevation_(el), inplane_(ip) {}

  double azimuth_ = 0;
  double elevation_ = 0;
  double inplane_ = 0;
};

/// Wraps azimuth and in-plane into range; rejects |elevation| > 90 (+1e-9 slack,
/// which is clamped back onto the pole).
Pose normalize_pose(double raw_azimuth, double raw_elevation, double raw_inplane);

/// Rotational change between two poses. Translation is reserved and always zero.
struct PoseDelta {
  double d_azimuth = 0;
  double d_elevation = 0;
  double d_inplane = 0;
  std::array<double, 3> d_translation{0.0, 0.0, 0.0};

  bool is_zero(double tolerance = 0.0) const noexcept;
  friend bool operator==(const PoseDelta&, const PoseDelta&) = default;
};

/// Componentwise application of a delta (azimuth/in-plane wrapped).
Pose apply_delta(const Pose& pose, const PoseDelta& delta);

/// Wrapped-Euler distance used for "same pose" checks: max absolute
/// componentwise difference after shortest-arc wrapping.
double pose_distance(const Pose& a, const Pose& b);

struct ChangeEvent {
  std::string object_id;
  FrameIndex frame_index = 0;
  std::string timestamp;  // ISO-8601 UTC
  PoseDelta delta;
  std::string evidence;   // SHA-256 hex of the archived frame image

  friend bool operator==(const ChangeEvent&, const ChangeEvent&) = default;
};

struct ObjectState {
  std::string mesh_ref;
  Pose pose;

  friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct SceneState {
  std::map<std::string, ObjectState> objects;
  FrameIndex as_of_frame = -1;

  friend bool operator==(const SceneState&, const SceneState&) = default;
};

}  // namespace twindelta
