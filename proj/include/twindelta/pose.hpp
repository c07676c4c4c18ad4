#pragma once

// Euler pose utilities: bin-plus-offset angle codec, rotation matrices,
// pose deltas and error metrics, and the pose estimator port.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "twindelta/scene.hpp"

namespace twindelta {

class AdapterClient;
struct TriangleMesh;

enum class AngleKind { Azimuth, Elevation, Inplane };

struct AngleRange {
  double min;
  double max;
};

/// azimuth [0,360), elevation [-90,90], in-plane [-180,180).
AngleRange angle_range(AngleKind kind) noexcept;

/// A classifier bin plus a regressed offset in [-1,1] of half the bin width.
struct AngleCode {
  int bin = 0;
  double delta = 0;

  friend bool operator==(const AngleCode&, const AngleCode&) = default;
};

/// angle = min + (bin + 0.5) w + delta w / 2, with w = (max - min) / bins, then
/// wrapped into the canonical range. Throws InvalidBin.
double decode_angle(const AngleCode& code, int bins, AngleKind kind);

/// Inverse of decode_angle for angles in (or wrapping into) the range.
/// Throws InvalidBin for bins < 1, ElevationOutOfRange for |elevation| > 90.
AngleCode encode_angle(double angle, int bins, AngleKind kind);

/// Orthonormal 3x3 matrix with determinant +1.
class RotationMatrix {
 public:
  RotationMatrix() : m_(Eigen::Matrix3d::Identity()) {}

  /// Throws NotARotation unless |R Rᵀ - I| and |det R - 1| are within tolerance.
  static RotationMatrix from_matrix(const Eigen::Matrix3d& m, double tolerance = 1e-9);

  const Eigen::Matrix3d& matrix() const noexcept { return m_; }
  RotationMatrix operator*(const RotationMatrix& other) const;
  RotationMatrix transpose() const;

 private:
  explicit RotationMatrix(const Eigen::Matrix3d& m) : m_(m) {}
  Eigen::Matrix3d m_;
};

/// R = R_y(ψ) · R_x(−θ) · R_z(−φ): azimuth φ about the vertical z axis, then
/// elevation θ about x, then in-plane roll ψ about the y viewing axis.
RotationMatrix pose_to_rotation(const Pose& pose);

/// Inverse of pose_to_rotation. At |θ| = 90 azimuth and roll are not separable;
/// azimuth is reported as 0 and the whole vertical turn goes to in-plane.
Pose rotation_to_pose(const RotationMatrix& rotation);

/// after − before: azimuth and in-plane wrapped to (−180,180], elevation plain.
PoseDelta pose_delta(const Pose& before, const Pose& after);

/// |real − predicted| / |real| × 100. Throws ZeroRealDelta when real == 0.
double percentage_error(double real_delta, double predicted_delta);

/// Inputs to a pose estimate. crop and mesh may be null for estimators that
/// do not look at pixels.
struct PoseQuery {
  const GrayFrame* crop = nullptr;
  const TriangleMesh* mesh = nullptr;
  std::string mesh_ref;
  std::string object_id;
  FrameIndex frame_index = 0;
};

class PoseEstimator {
 public:
  virtual ~PoseEstimator() = default;
  virtual Pose estimate(const PoseQuery& query) = 0;
};

/// Returns a known pose plus independent Gaussian noise (degrees) per angle.
/// Noise depends only on (seed, frame, object), not on call order. Elevation
/// is clamped to the poles.
class OraclePoseEstimator : public PoseEstimator {
 public:
  using Lookup = std::function<Pose(const PoseQuery&)>;

  OraclePoseEstimator(Lookup truth, double sigma_deg, std::uint64_t seed);
  Pose estimate(const PoseQuery& query) override;

 private:
  Lookup truth_;
  double sigma_;
  std::uint64_t seed_;
};

/// Forwards estimate_pose requests to an external adapter process.
class AdapterPoseEstimator : public PoseEstimator {
 public:
  explicit AdapterPoseEstimator(std::shared_ptr<AdapterClient> client);
  Pose estimate(const PoseQuery& query) override;

 private:
  std::shared_ptr<AdapterClient> client_;
};

}  // namespace twindelta
