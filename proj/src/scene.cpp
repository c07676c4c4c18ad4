#include "twindelta/scene.hpp"

#include <algorithm>
#include <cmath>

#include "twindelta/error.hpp"

namespace twindelta {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ElevationOutOfRange: return "ElevationOutOfRange";
    case ErrorCode::InvalidBin: return "InvalidBin";
    case ErrorCode::NotARotation: return "NotARotation";
    case ErrorCode::ZeroRealDelta: return "ZeroRealDelta";
    case ErrorCode::BoxOutOfFrame: return "BoxOutOfFrame";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::InvalidFrame: return "InvalidFrame";
    case ErrorCode::OutOfOrderEvent: return "OutOfOrderEvent";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::MalformedStl: return "MalformedStl";
    case ErrorCode::MalformedObj: return "MalformedObj";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::BackendFailure: return "BackendFailure";
  }
  return "Unknown";
}

GrayFrame::GrayFrame(int width, int height, std::vector<double> pixels, FrameIndex index)
    : width_(width), height_(height), pixels_(std::move(pixels)), index_(index) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidFrame, "frame dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidFrame, "pixel count does not match width x height");
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidFrame, "intensity outside [0,1]");
    }
  }
}

GrayFrame GrayFrame::filled(int width, int height, double value, FrameIndex index) {
  return GrayFrame(width, height,
                   std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                           std::max(height, 0),
                                       value),
                   index);
}

GrayFrame GrayFrame::with_index(FrameIndex index) const {
  GrayFrame copy = *this;
  copy.index_ = index;
  return copy;
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double Mask::fraction() const noexcept {
  return bits.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits.size());
}

double mask_iou(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::DimensionMismatch, "mask sizes differ");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] && b.bits[i]) ? 1 : 0;
    uni += (a.bits[i] || b.bits[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double BoundingBox::area() const noexcept {
  return well_formed() ? width() * height() : 0.0;
}

bool BoundingBox::within(int frame_width, int frame_height) const noexcept {
  return x_min >= 0 && y_min >= 0 && x_max <= frame_width && y_max <= frame_height;
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni <= 0 ? 0.0 : std::clamp(inter / uni, 0.0, 1.0);
}

void ClassRegistry::validate(const Detection& d, int frame_width, int frame_height) const {
  if (d.label.empty() || !contains(d.label)) {
    throw Error(ErrorCode::InvalidArgument, "unregistered class label '" + d.label + "'");
  }
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence outside [0,1]");
  }
  if (!d.bbox.well_formed() || !d.bbox.within(frame_width, frame_height)) {
    throw Error(ErrorCode::BoxOutOfFrame, "detection box malformed or outside the frame");
  }
}

double wrap_azimuth(double deg) {
  if (deg >= 0.0 && deg < 360.0) return deg;
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

double wrap_inplane(double deg) {
  if (deg >= -180.0 && deg < 180.0) return deg;
  double r = std::fmod(deg, 360.0);
  if (r >= 180.0) r -= 360.0;
  if (r < -180.0) r += 360.0;
  return r;
}

double wrap_delta(double deg) {
  if (deg > -180.0 && deg <= 180.0) return deg;
  double r = std::fmod(deg, 360.0);
  if (r > 180.0) r -= 360.0;
  if (r <= -180.0) r += 360.0;
  return r;
}

Pose normalize_pose(double raw_azimuth, double raw_elevation, double raw_inplane) {
  if (!std::isfinite(raw_azimuth) || !std::isfinite(raw_elevation) ||
      !std::isfinite(raw_inplane)) {
    throw Error(ErrorCode::InvalidArgument, "non-finite angle");
  }
  if (std::abs(raw_elevation) > 90.0 + 1e-9) {
    throw Error(ErrorCode::ElevationOutOfRange,
                "elevation " + std::to_string(raw_elevation) + " outside [-90,90]");
  }
  return Pose(wrap_azimuth(raw_azimuth), std::clamp(raw_elevation, -90.0, 90.0),
              wrap_inplane(raw_inplane));
}

bool PoseDelta::is_zero(double tolerance) const noexcept {
  return std::abs(d_azimuth) <= tolerance && std::abs(d_elevation) <= tolerance &&
         std::abs(d_inplane) <= tolerance;
}

Pose apply_delta(const Pose& pose, const PoseDelta& delta) {
  return normalize_pose(pose.azimuth() + delta.d_azimuth, pose.elevation() + delta.d_elevation,
                        pose.inplane() + delta.d_inplane);
}

double pose_distance(const Pose& a, const Pose& b) {
  return std::max({std::abs(wrap_delta(a.azimuth() - b.azimuth())),
                   std::abs(a.elevation() - b.elevation()),
                   std::abs(wrap_delta(a.inplane() - b.inplane()))});
}

}  // namespace twindelta
