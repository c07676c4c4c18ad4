#pragma once

// Standard (exact) Dynamic Mode Decomposition over a snapshot sequence, plus
// the spectral background/foreground split used for motion detection.
//
// Given snapshots x_0..x_{m-1} (columns), with X = [x_0..x_{m-2}] and
// X' = [x_1..x_{m-1}]:
//   X = U S V^T (thin, truncated to rank r)
//   A~ = U^T X' V S^-1,  A~ W = W L
//   Psi = X' V S^-1 W,   Psi b0 = x_0 (least squares)
//   x^(k) = Psi L^k b0

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "twindelta/scene.hpp"

namespace twindelta::dmd {

struct SnapshotMatrices {
  Eigen::MatrixXd x;       // n x (m-1): snapshots 0..m-2
  Eigen::MatrixXd x_next;  // n x (m-1): snapshots 1..m-1

  Eigen::Index state_dim() const noexcept { return x.rows(); }
  Eigen::Index snapshot_count() const noexcept { return x.cols() + 1; }
  Eigen::VectorXd first() const { return x.col(0); }

  /// Columns of `sequence` are consecutive snapshots; needs at least two.
  static SnapshotMatrices from_sequence(const Eigen::MatrixXd& sequence);
};

/// Flattens each frame row-major into one column.
SnapshotMatrices build_snapshots(std::span<const GrayFrame> frames);

struct FixedRank {
  int rank;
};
struct EnergyThreshold {
  double tau;  // in (0,1]: smallest r whose cumulative sigma^2 share reaches tau
};
using RankPolicy = std::variant<FixedRank, EnergyThreshold>;

inline constexpr double kDefaultEnergy = 0.999;
inline constexpr double kSingularFloor = 1e-12;
inline constexpr double kDefaultModeEpsilon = 0.01;

struct DmdModel {
  int rank = 0;
  Eigen::MatrixXcd modes;             // Psi, n x r
  Eigen::VectorXcd eigenvalues;       // diag(L), r
  Eigen::VectorXcd amplitudes;        // b0, r
  Eigen::MatrixXd reduced_operator;   // A~, r x r (real for real data)

  // Truncated SVD factors, kept for consistency checks.
  Eigen::MatrixXd svd_u;              // n x r
  Eigen::VectorXd singular_values;    // r
  Eigen::MatrixXd svd_v;              // (m-1) x r

  Eigen::Index state_dim() const noexcept { return modes.rows(); }

  /// max(|U^T U - I|, |V^T V - I|) over the truncated factors.
  double svd_orthonormality_error() const;
};

DmdModel compute_dmd(const SnapshotMatrices& snapshots,
                     const RankPolicy& policy = EnergyThreshold{kDefaultEnergy});

struct ModePartition {
  std::vector<int> background;
  std::vector<int> foreground;
};

/// Background = modes with ||lambda|-1| <= eps and |arg lambda| <= eps; when none
/// qualify, the single mode minimising |ln lambda|.
ModePartition classify_modes(const DmdModel& model, double epsilon = kDefaultModeEpsilon);

/// Sum over `subset` (default all modes) of psi_j lambda_j^k b0_j, before the
/// real-part projection.
Eigen::VectorXcd reconstruct_complex(const DmdModel& model, int k,
                                     const std::optional<std::vector<int>>& subset = {});

/// Real part of reconstruct_complex.
Eigen::VectorXd reconstruct(const DmdModel& model, int k,
                            const std::optional<std::vector<int>>& subset = {});

/// Background reconstruction at step k, clamped to [0,1] and reshaped.
GrayFrame background_frame(const DmdModel& model, const ModePartition& partition, int k,
                           int width, int height, FrameIndex index = 0);

/// Signed residual frame - background.
std::vector<double> foreground_residual(const GrayFrame& frame, const GrayFrame& background);

/// mask[i] = |residual[i]| >= threshold.
Mask foreground_mask(std::span<const double> residual, int width, int height, double threshold);

}  // namespace twindelta::dmd
