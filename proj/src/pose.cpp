#include "twindelta/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "twindelta/adapter.hpp"
#include "twindelta/error.hpp"
#include "twindelta/random.hpp"

namespace twindelta {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap_to(AngleKind kind, double deg) {
  switch (kind) {
    case AngleKind::Azimuth:
      return wrap_azimuth(deg);
    case AngleKind::Inplane:
      return wrap_inplane(deg);
    case AngleKind::Elevation:
      break;
  }
  if (std::abs(deg) > 90.0 + 1e-9) {
    throw Error(ErrorCode::ElevationOutOfRange, "elevation " + std::to_string(deg));
  }
  return std::clamp(deg, -90.0, 90.0);
}

Eigen::Matrix3d rot_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Eigen::Matrix3d rot_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

AngleRange angle_range(AngleKind kind) noexcept {
  switch (kind) {
    case AngleKind::Azimuth:
      return {0.0, 360.0};
    case AngleKind::Elevation:
      return {-90.0, 90.0};
    case AngleKind::Inplane:
      return {-180.0, 180.0};
  }
  return {0.0, 0.0};
}

double decode_angle(const AngleCode& code, int bins, AngleKind kind) {
  if (bins < 1) throw Error(ErrorCode::InvalidBin, "bin count must be positive");
  if (code.bin < 0 || code.bin >= bins) {
    throw Error(ErrorCode::InvalidBin,
                "bin " + std::to_string(code.bin) + " outside [0," + std::to_string(bins) + ")");
  }
  if (!(std::abs(code.delta) <= 1.0)) {
    throw Error(ErrorCode::InvalidBin, "offset must lie in [-1,1]");
  }
  const auto [lo, hi] = angle_range(kind);
  const double width = (hi - lo) / bins;
  const double center = lo + (code.bin + 0.5) * width;
  return wrap_to(kind, center + code.delta * width / 2.0);
}

AngleCode encode_angle(double angle, int bins, AngleKind kind) {
  if (bins < 1) throw Error(ErrorCode::InvalidBin, "bin count must be positive");
  if (!std::isfinite(angle)) throw Error(ErrorCode::InvalidArgument, "angle is not finite");
  const double a = wrap_to(kind, angle);
  const auto [lo, hi] = angle_range(kind);
  const double width = (hi - lo) / bins;
  const int bin = std::clamp(static_cast<int>(std::floor((a - lo) / width)), 0, bins - 1);
  const double center = lo + (bin + 0.5) * width;
  return {bin, std::clamp((a - center) / (width / 2.0), -1.0, 1.0)};
}

RotationMatrix RotationMatrix::from_matrix(const Eigen::Matrix3d& m, double tolerance) {
  if (!m.allFinite()) throw Error(ErrorCode::NotARotation, "matrix has non-finite entries");
  const double ortho = (m * m.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  const double det = m.determinant();
  if (ortho > tolerance || std::abs(det - 1.0) > tolerance) {
    throw Error(ErrorCode::NotARotation, "orthogonality error " + std::to_string(ortho) +
                                             ", determinant " + std::to_string(det));
  }
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::operator*(const RotationMatrix& other) const {
  return RotationMatrix(m_ * other.m_);
}

RotationMatrix RotationMatrix::transpose() const { return RotationMatrix(m_.transpose()); }

RotationMatrix pose_to_rotation(const Pose& pose) {
  return RotationMatrix::from_matrix(rot_y(pose.inplane() * kDeg) *
                                     rot_x(-pose.elevation() * kDeg) *
                                     rot_z(-pose.azimuth() * kDeg));
}

Pose rotation_to_pose(const RotationMatrix& rotation) {
  // R = Ry(ψ) Rx(α) Rz(β) with α = −θ, β = −φ. Its middle row is
  // [cos α sin β, cos α cos β, −sin α] and its last column is
  // [sin ψ cos α, −sin α, cos ψ cos α].
  const Eigen::Matrix3d& r = rotation.matrix();
  const double cos_a = std::hypot(r(1, 0), r(1, 1));
  const double alpha = std::atan2(-r(1, 2), cos_a);
  double beta = 0;
  double psi = 0;
  if (cos_a > 1e-12) {
    beta = std::atan2(r(1, 0), r(1, 1));
    psi = std::atan2(r(0, 2), r(2, 2));
  } else {
    // Ry(ψ) Rx(±90°): first column is [cos ψ, 0, −sin ψ].
    psi = std::atan2(-r(2, 0), r(0, 0));
  }
  return normalize_pose(-beta / kDeg, -alpha / kDeg, psi / kDeg);
}

PoseDelta pose_delta(const Pose& before, const Pose& after) {
  PoseDelta d;
  d.d_azimuth = wrap_delta(after.azimuth() - before.azimuth());
  d.d_elevation = after.elevation() - before.elevation();
  d.d_inplane = wrap_delta(after.inplane() - before.inplane());
  return d;
}

double percentage_error(double real_delta, double predicted_delta) {
  if (real_delta == 0.0) {
    throw Error(ErrorCode::ZeroRealDelta, "percentage error is undefined for a zero real delta");
  }
  return std::abs(real_delta - predicted_delta) * 100.0 / std::abs(real_delta);
}

OraclePoseEstimator::OraclePoseEstimator(Lookup truth, double sigma_deg, std::uint64_t seed)
    : truth_(std::move(truth)), sigma_(sigma_deg), seed_(seed) {
  if (!(sigma_deg >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
}

Pose OraclePoseEstimator::estimate(const PoseQuery& query) {
  const Pose truth = truth_(query);
  if (sigma_ == 0.0) return truth;
  NormalStream noise(mix_seed(seed_ ^ fnv1a(query.object_id),
                              static_cast<std::uint64_t>(query.frame_index)));
  const double az = truth.azimuth() + sigma_ * noise.next();
  const double el = std::clamp(truth.elevation() + sigma_ * noise.next(), -90.0, 90.0);
  const double ip = truth.inplane() + sigma_ * noise.next();
  return normalize_pose(az, el, ip);
}

AdapterPoseEstimator::AdapterPoseEstimator(std::shared_ptr<AdapterClient> client)
    : client_(std::move(client)) {
  if (!client_) throw Error(ErrorCode::InvalidArgument, "adapter client is null");
}

Pose AdapterPoseEstimator::estimate(const PoseQuery& query) {
  if (!query.crop) throw Error(ErrorCode::InvalidArgument, "adapter pose estimate needs a crop");
  return client_->estimate_pose(*query.crop, query.mesh_ref);
}

}  // namespace twindelta
