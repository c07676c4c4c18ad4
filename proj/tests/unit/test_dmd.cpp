#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "twindelta/dmd.hpp"
#include "twindelta/error.hpp"

using namespace twindelta;
using namespace twindelta::dmd;
using cd = std::complex<double>;

namespace {

Eigen::MatrixXd iterate(const Eigen::MatrixXd& a, const Eigen::VectorXd& x0, int m) {
  Eigen::MatrixXd seq(x0.size(), m);
  seq.col(0) = x0;
  for (int k = 1; k < m; ++k) seq.col(k) = a * seq.col(k - 1);
  return seq;
}

DmdModel model_with_eigenvalues(std::initializer_list<cd> values) {
  DmdModel m;
  m.eigenvalues.resize(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (cd v : values) m.eigenvalues(i++) = v;
  m.rank = static_cast<int>(values.size());
  return m;
}

double rel_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

}  // namespace

TEST(Snapshots, ShiftedPair) {
  std::vector<GrayFrame> frames = {GrayFrame(2, 1, {0.1, 0.2}), GrayFrame(2, 1, {0.3, 0.4}),
                                   GrayFrame(2, 1, {0.5, 0.6})};
  const SnapshotMatrices s = build_snapshots(frames);
  ASSERT_EQ(s.x.cols(), 2);
  ASSERT_EQ(s.x.rows(), 2);
  EXPECT_DOUBLE_EQ(s.x(0, 0), 0.1);
  EXPECT_DOUBLE_EQ(s.x(1, 1), 0.4);
  EXPECT_DOUBLE_EQ(s.x_next(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(s.x_next(1, 1), 0.6);
  EXPECT_EQ(s.snapshot_count(), 3);
}

TEST(Snapshots, IdenticalPair) {
  std::vector<GrayFrame> frames(2, GrayFrame(2, 2, {0.1, 0.2, 0.3, 0.4}));
  const SnapshotMatrices s = build_snapshots(frames);
  EXPECT_EQ(s.x.cols(), 1);
  EXPECT_EQ(s.x, s.x_next);
}

TEST(Snapshots, Errors) {
  std::vector<GrayFrame> mixed = {GrayFrame::filled(2, 2, 0.1), GrayFrame::filled(3, 2, 0.1)};
  try {
    build_snapshots(mixed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  std::vector<GrayFrame> one = {GrayFrame::filled(2, 2, 0.1)};
  try {
    build_snapshots(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewFrames);
  }
}

TEST(ComputeDmd, ConstantSequence) {
  Eigen::VectorXd c(4);
  c << 0.3, 0.7, 0.1, 0.9;
  const Eigen::MatrixXd seq = c.replicate(1, 10);
  const DmdModel m = compute_dmd(SnapshotMatrices::from_sequence(seq));
  ASSERT_EQ(m.rank, 1);
  EXPECT_NEAR(std::abs(m.eigenvalues(0) - cd(1.0, 0.0)), 0.0, 1e-9);
  for (int k = 0; k < 10; ++k) EXPECT_LE(rel_error(reconstruct(m, k), c), 1e-8);
}

TEST(ComputeDmd, PlaneRotation) {
  const double t = 0.1;
  Eigen::MatrixXd a(2, 2);
  a << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  const Eigen::MatrixXd seq = iterate(a, Eigen::Vector2d(1, 0), 20);
  const DmdModel m = compute_dmd(SnapshotMatrices::from_sequence(seq), FixedRank{2});
  Eigen::VectorXcd expected(2);
  expected << std::polar(1.0, t), std::polar(1.0, -t);
  EXPECT_LE(twindelta::testing::eigenvalue_match_error(expected, m.eigenvalues), 1e-8);

  Eigen::MatrixXd a5 = Eigen::MatrixXd::Identity(2, 2);
  for (int i = 0; i < 5; ++i) a5 = a * a5;
  const Eigen::VectorXd want = a5 * Eigen::Vector2d(1, 0);
  const Eigen::VectorXd got = reconstruct(m, 5);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(got(i), want(i), 1e-6);
}

TEST(ComputeDmd, GeometricDecay) {
  Eigen::VectorXd v(3);
  v << 1.0, -2.0, 0.5;
  Eigen::MatrixXd seq(3, 10);
  for (int k = 0; k < 10; ++k) seq.col(k) = std::pow(0.9, k) * v;
  const DmdModel m = compute_dmd(SnapshotMatrices::from_sequence(seq));
  ASSERT_EQ(m.rank, 1);
  EXPECT_NEAR(m.eigenvalues(0).real(), 0.9, 1e-8);
  EXPECT_NEAR(m.eigenvalues(0).imag(), 0.0, 1e-8);
}

TEST(ComputeDmd, RankErrors) {
  const Eigen::MatrixXd seq = Eigen::MatrixXd::Random(4, 5);
  try {
    compute_dmd(SnapshotMatrices::from_sequence(seq), FixedRank{5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankTooLarge);
  }
  try {
    compute_dmd(SnapshotMatrices::from_sequence(Eigen::MatrixXd::Zero(4, 5)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
}

TEST(ComputeDmd, ReducedOperatorEigenvaluesMatchField) {
  std::mt19937_64 rng(3);
  const auto sys = twindelta::testing::random_linear_system(rng, 8, 5, 20);
  const DmdModel m = compute_dmd(SnapshotMatrices::from_sequence(sys.snapshots), FixedRank{5});
  Eigen::EigenSolver<Eigen::MatrixXd> es(m.reduced_operator);
  EXPECT_LE(twindelta::testing::eigenvalue_match_error(es.eigenvalues(), m.eigenvalues), 1e-9);
}

TEST(ComputeDmdProperty, ExactLinearRecovery) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 10)(rng);
    const int rho = std::uniform_int_distribution<int>(1, n)(rng);
    const auto sys = twindelta::testing::random_linear_system(rng, n, rho, 20);
    const DmdModel m =
        compute_dmd(SnapshotMatrices::from_sequence(sys.snapshots), FixedRank{rho});
    EXPECT_LE(twindelta::testing::eigenvalue_match_error(sys.nonzero_eigenvalues, m.eigenvalues), 1e-8)
        << "trial " << trial << " n=" << n << " rho=" << rho;
    for (int k = 0; k < 20; ++k) {
      EXPECT_LE(rel_error(reconstruct(m, k), sys.snapshots.col(k)), 1e-8)
          << "trial " << trial << " k=" << k;
    }
  }
}

TEST(ComputeDmdProperty, ConjugateSymmetryAndSvdOrthonormality) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::MatrixXd seq =
        Eigen::MatrixXd::NullaryExpr(12, 9, [&] { return std::uniform_real_distribution<>(0, 1)(rng); });
    const DmdModel m = compute_dmd(SnapshotMatrices::from_sequence(seq));
    EXPECT_LE(m.svd_orthonormality_error(), 1e-10);

    for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) {
      const cd l = m.eigenvalues(i);
      if (std::abs(l.imag()) < 1e-12) continue;
      double best = INFINITY;
      for (Eigen::Index j = 0; j < m.eigenvalues.size(); ++j) {
        if (j != i) best = std::min(best, std::abs(m.eigenvalues(j) - std::conj(l)));
      }
      EXPECT_LE(best, 1e-9);
    }
    for (int k : {0, 3, 8}) {
      EXPECT_LE(reconstruct_complex(m, k).imag().cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(ClassifyModes, StationaryVersusDecaying) {
  const ModePartition p = classify_modes(model_with_eigenvalues({1.0, 0.5}), 0.01);
  EXPECT_EQ(p.background, std::vector<int>{0});
  EXPECT_EQ(p.foreground, std::vector<int>{1});
}

TEST(ClassifyModes, NearUnitSlowMode) {
  const ModePartition p =
      classify_modes(model_with_eigenvalues({cd(0.999, 0.001), cd(0.3, 0.8)}), 0.01);
  EXPECT_EQ(p.background, std::vector<int>{0});
  EXPECT_EQ(p.foreground, std::vector<int>{1});
}

TEST(ClassifyModes, FallbackToSmallestLog) {
  const ModePartition p = classify_modes(model_with_eigenvalues({0.9, 0.8}), 0.01);
  EXPECT_EQ(p.background, std::vector<int>{0});
  EXPECT_EQ(p.foreground, std::vector<int>{1});
  const ModePartition q = classify_modes(model_with_eigenvalues({0.8, 0.9}), 0.01);
  EXPECT_EQ(q.background, std::vector<int>{1});
}

TEST(ClassifyModes, PartitionTotality) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int trial = 0; trial < 500; ++trial) {
    const int r = std::uniform_int_distribution<int>(1, 8)(rng);
    DmdModel m;
    m.eigenvalues.resize(r);
    for (int i = 0; i < r; ++i) m.eigenvalues(i) = cd(u(rng), u(rng));
    if (trial % 5 == 0) m.eigenvalues(0) = cd(1.0, 0.0);
    const ModePartition p = classify_modes(m, 0.01);
    std::vector<int> seen(static_cast<std::size_t>(r), 0);
    for (int j : p.background) ++seen[static_cast<std::size_t>(j)];
    for (int j : p.foreground) ++seen[static_cast<std::size_t>(j)];
    for (int s : seen) EXPECT_EQ(s, 1);
    EXPECT_FALSE(p.background.empty());
  }
}

TEST(Reconstruct, EmptySubsetIsZero) {
  std::mt19937_64 rng(4);
  const auto sys = twindelta::testing::random_linear_system(rng, 6, 3, 20);
  const DmdModel m = compute_dmd(SnapshotMatrices::from_sequence(sys.snapshots), FixedRank{3});
  EXPECT_EQ(reconstruct(m, 4, std::vector<int>{}).norm(), 0.0);
  try {
    reconstruct(m, 0, std::vector<int>{7});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
}

TEST(Foreground, ThresholdSemantics) {
  const std::vector<double> residual(16, 0.05);
  EXPECT_EQ(foreground_mask(residual, 4, 4, 0.1).count(), 0u);
  EXPECT_EQ(foreground_mask(residual, 4, 4, 0.04).count(), 16u);
  const std::vector<double> negative(16, -0.05);
  EXPECT_EQ(foreground_mask(negative, 4, 4, 0.04).count(), 16u);
}

TEST(Foreground, StaticVideoHasEmptyMask) {
  std::vector<GrayFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(GrayFrame::filled(8, 8, 0.4, i));
  const DmdModel m = compute_dmd(build_snapshots(frames));
  const ModePartition p = classify_modes(m);
  const GrayFrame bg = background_frame(m, p, 5, 8, 8);
  const auto residual = foreground_residual(frames.back(), bg);
  for (double t : {1e-6, 1e-3, 0.1}) EXPECT_EQ(foreground_mask(residual, 8, 8, t).count(), 0u);
}
