#include "twindelta/dmd.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "twindelta/error.hpp"

namespace twindelta::dmd {

namespace {

using cd = std::complex<double>;

cd ipow(cd base, int k) {
  cd result{1.0, 0.0};
  while (k > 0) {
    if (k & 1) result *= base;
    base *= base;
    k >>= 1;
  }
  return result;
}

int select_rank(const Eigen::VectorXd& sigma, const RankPolicy& policy) {
  const int available = static_cast<int>(sigma.size());
  if (const auto* fixed = std::get_if<FixedRank>(&policy)) {
    if (fixed->rank < 1) throw Error(ErrorCode::InvalidArgument, "rank must be >= 1");
    if (fixed->rank > available) {
      throw Error(ErrorCode::RankTooLarge, "rank " + std::to_string(fixed->rank) +
                                               " exceeds min(n, m-1) = " +
                                               std::to_string(available));
    }
    return fixed->rank;
  }
  const double tau = std::get<EnergyThreshold>(policy).tau;
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "energy threshold must lie in (0,1]");
  }
  const double total = sigma.squaredNorm();
  double running = 0.0;
  for (int r = 0; r < available; ++r) {
    running += sigma(r) * sigma(r);
    if (running >= tau * total) return r + 1;
  }
  return available;
}

}  // namespace

SnapshotMatrices SnapshotMatrices::from_sequence(const Eigen::MatrixXd& sequence) {
  if (sequence.cols() < 2) {
    throw Error(ErrorCode::TooFewFrames, "need at least two snapshots");
  }
  const Eigen::Index m = sequence.cols();
  return SnapshotMatrices{sequence.leftCols(m - 1), sequence.rightCols(m - 1)};
}

SnapshotMatrices build_snapshots(std::span<const GrayFrame> frames) {
  if (frames.size() < 2) {
    throw Error(ErrorCode::TooFewFrames, "need at least two frames, got " +
                                             std::to_string(frames.size()));
  }
  const GrayFrame& ref = frames.front();
  Eigen::MatrixXd seq(static_cast<Eigen::Index>(ref.size()),
                      static_cast<Eigen::Index>(frames.size()));
  for (std::size_t j = 0; j < frames.size(); ++j) {
    if (!frames[j].same_shape(ref)) {
      throw Error(ErrorCode::DimensionMismatch, "frame " + std::to_string(j) +
                                                    " differs in size from frame 0");
    }
    const auto px = frames[j].pixels();
    seq.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(px.data(), static_cast<Eigen::Index>(px.size()));
  }
  return SnapshotMatrices::from_sequence(seq);
}

double DmdModel::svd_orthonormality_error() const {
  const auto r = svd_u.cols();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(r, r);
  const double eu = (svd_u.transpose() * svd_u - eye).cwiseAbs().maxCoeff();
  const double ev = (svd_v.transpose() * svd_v - eye).cwiseAbs().maxCoeff();
  return std::max(eu, ev);
}

DmdModel compute_dmd(const SnapshotMatrices& s, const RankPolicy& policy) {
  if (s.x.cols() < 1 || s.x.rows() < 1) {
    throw Error(ErrorCode::TooFewFrames, "empty snapshot matrices");
  }
  if (s.x.rows() != s.x_next.rows() || s.x.cols() != s.x_next.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "X and X' differ in shape");
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma.size() == 0 || !(sigma(0) > 0.0)) {
    throw Error(ErrorCode::DegenerateData, "snapshot matrix is identically zero");
  }
  const int r = select_rank(sigma, policy);
  if (sigma(r - 1) < kSingularFloor * sigma(0)) {
    throw Error(ErrorCode::DegenerateData,
                "retained singular value below 1e-12 of the largest (rank " +
                    std::to_string(r) + ")");
  }

  DmdModel model;
  model.rank = r;
  model.svd_u = svd.matrixU().leftCols(r);
  model.singular_values = sigma.head(r);
  model.svd_v = svd.matrixV().leftCols(r);

  // X' V S^-1 is shared by the reduced operator and the modes.
  const Eigen::MatrixXd projected =
      s.x_next * model.svd_v * model.singular_values.cwiseInverse().asDiagonal();
  model.reduced_operator = model.svd_u.transpose() * projected;

  Eigen::EigenSolver<Eigen::MatrixXd> eig(model.reduced_operator, true);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::DegenerateData, "eigendecomposition of the reduced operator failed");
  }
  model.eigenvalues = eig.eigenvalues();
  model.modes = projected.cast<cd>() * eig.eigenvectors();

  const Eigen::VectorXcd x0 = s.x.col(0).cast<cd>();
  model.amplitudes = model.modes.completeOrthogonalDecomposition().solve(x0);
  return model;
}

ModePartition classify_modes(const DmdModel& model, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  ModePartition part;
  const int r = static_cast<int>(model.eigenvalues.size());
  std::vector<bool> is_background(static_cast<std::size_t>(r), false);
  bool any = false;
  for (int j = 0; j < r; ++j) {
    const cd lambda = model.eigenvalues(j);
    const bool near_unit = std::abs(std::abs(lambda) - 1.0) <= epsilon;
    const bool slow = std::abs(std::arg(lambda)) <= epsilon;
    if (near_unit && slow) {
      is_background[static_cast<std::size_t>(j)] = true;
      any = true;
    }
  }
  if (!any && r > 0) {
    int best = 0;
    double best_log = std::numeric_limits<double>::infinity();
    for (int j = 0; j < r; ++j) {
      const double v = std::abs(std::log(model.eigenvalues(j)));
      if (v < best_log) {
        best_log = v;
        best = j;
      }
    }
    is_background[static_cast<std::size_t>(best)] = true;
  }
  for (int j = 0; j < r; ++j) {
    (is_background[static_cast<std::size_t>(j)] ? part.background : part.foreground)
        .push_back(j);
  }
  return part;
}

Eigen::VectorXcd reconstruct_complex(const DmdModel& model, int k,
                                     const std::optional<std::vector<int>>& subset) {
  if (k < 0) throw Error(ErrorCode::IndexOutOfRange, "step index must be >= 0");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(model.modes.rows());
  auto add_mode = [&](int j) {
    if (j < 0 || j >= model.rank) {
      throw Error(ErrorCode::IndexOutOfRange, "mode index " + std::to_string(j) +
                                                  " outside [0," + std::to_string(model.rank) +
                                                  ")");
    }
    out += model.modes.col(j) * (ipow(model.eigenvalues(j), k) * model.amplitudes(j));
  };
  if (subset) {
    for (int j : *subset) add_mode(j);
  } else {
    for (int j = 0; j < model.rank; ++j) add_mode(j);
  }
  return out;
}

Eigen::VectorXd reconstruct(const DmdModel& model, int k,
                            const std::optional<std::vector<int>>& subset) {
  return reconstruct_complex(model, k, subset).real();
}

GrayFrame background_frame(const DmdModel& model, const ModePartition& partition, int k,
                           int width, int height, FrameIndex index) {
  if (static_cast<Eigen::Index>(width) * height != model.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "frame shape does not match model state size");
  }
  const Eigen::VectorXd bg = reconstruct(model, k, partition.background);
  std::vector<double> px(static_cast<std::size_t>(bg.size()));
  for (Eigen::Index i = 0; i < bg.size(); ++i) {
    px[static_cast<std::size_t>(i)] = std::clamp(bg(i), 0.0, 1.0);
  }
  return GrayFrame(width, height, std::move(px), index);
}

std::vector<double> foreground_residual(const GrayFrame& frame, const GrayFrame& background) {
  if (!frame.same_shape(background)) {
    throw Error(ErrorCode::DimensionMismatch, "frame and background differ in size");
  }
  std::vector<double> out(frame.size());
  const auto f = frame.pixels();
  const auto b = background.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f[i] - b[i];
  return out;
}

Mask foreground_mask(std::span<const double> residual, int width, int height, double threshold) {
  if (residual.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::DimensionMismatch, "residual length does not match mask shape");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "mask threshold must lie in (0,1)");
  }
  Mask mask(width, height);
  for (std::size_t i = 0; i < residual.size(); ++i) {
    mask.bits[i] = std::abs(residual[i]) >= threshold ? 1 : 0;
  }
  return mask;
}

}  // namespace twindelta::dmd
