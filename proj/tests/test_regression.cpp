#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "koopman/benchmarks.hpp"
#include "koopman/regression.hpp"
#include "oracles.hpp"

namespace koopman {
namespace {

std::vector<cdouble> to_vec(const VectorXcd& v) { return {v.data(), v.data() + v.size()}; }

/// Columns of consecutive states from trajectories given as rows.
void stack_pairs(const std::vector<MatrixXd>& trajs, MatrixXd& X, MatrixXd& Xp) {
  Index m = 0;
  for (const auto& t : trajs) m += t.rows() - 1;
  X.resize(trajs.front().cols(), m);
  Xp.resize(trajs.front().cols(), m);
  Index c = 0;
  for (const auto& t : trajs) {
    X.middleCols(c, t.rows() - 1) = t.topRows(t.rows() - 1).transpose();
    Xp.middleCols(c, t.rows() - 1) = t.bottomRows(t.rows() - 1).transpose();
    c += t.rows() - 1;
  }
}

MatrixXd slow_manifold_lift(const MatrixXd& X) {
  MatrixXd Z(3, X.cols());
  Z.topRows(2) = X;
  Z.row(2) = X.row(0).array().square();
  return Z;
}

TEST(Edmd, SlowManifoldEmbeddingEigenvalues) {
  const auto data = bench::slow_manifold_grid(4, 60, 0.02);
  MatrixXd X, Xp;
  stack_pairs(data.trajectories, X, Xp);
  const auto res = fit_edmd(slow_manifold_lift(X), slow_manifold_lift(Xp), {{}, 0.02});
  ASSERT_EQ(res.rank(), 3);
  const std::vector<cdouble> want = {0.9990005, 0.9801987, 0.9980020};
  EXPECT_LT(oracle::multiset_distance(to_vec(res.eigen.lambdas), want), 1e-6);
  // Closed-form generator eigenvalues, independent of the 7-digit constants.
  std::vector<cdouble> exact;
  for (double v : oracle::slow_manifold_discrete_eigs(-0.05, -1.0, 0.02)) exact.push_back(v);
  EXPECT_LT(oracle::multiset_distance(to_vec(res.eigen.lambdas), exact), 1e-6);
}

TEST(Edmd, IdentityDynamics) {
  const MatrixXd Z = MatrixXd::Random(3, 20);
  const auto res = fit_edmd(Z, Z);
  EXPECT_TRUE(res.A.isApprox(MatrixXd::Identity(3, 3), 1e-12));
  for (Index j = 0; j < res.rank(); ++j) EXPECT_NEAR(std::abs(res.eigen.lambdas(j) - 1.0), 0, 1e-12);
}

TEST(Edmd, RandomLinearDataMatchesPseudoinverse) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd M = MatrixXd::Random(3, 3);
    const MatrixXd Z = MatrixXd::Random(3, 50);
    const MatrixXd Zp = M * Z;
    const auto res = fit_edmd(Z, Zp);
    EXPECT_LT((res.A - M).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((res.A - oracle::pinv_operator(Z, Zp)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Edmd, LeastSquaresLocalOptimality) {
  const MatrixXd Z = MatrixXd::Random(4, 30), Zp = MatrixXd::Random(4, 30);
  const auto res = fit_edmd(Z, Zp);
  const double base = (Zp - res.A * Z).norm();
  EXPECT_NEAR(base, res.residual, 1e-12);
  for (int k = 0; k < 20; ++k) {
    const MatrixXd E = MatrixXd::Random(4, 4) * 1e-3;
    EXPECT_LE(base, (Zp - (res.A + E) * Z).norm());
  }
}

TEST(Edmd, SingularValuesPositiveNonIncreasing) {
  const auto res = fit_edmd(MatrixXd::Random(5, 40), MatrixXd::Random(5, 40));
  for (Index i = 0; i < res.svd.S.size(); ++i) {
    EXPECT_GT(res.svd.S(i), 0.0);
    if (i) EXPECT_LE(res.svd.S(i), res.svd.S(i - 1));
  }
}

TEST(Edmd, ErrorsAndTruncation) {
  EXPECT_THROW(fit_edmd(MatrixXd::Random(2, 1), MatrixXd::Random(2, 1)), Error);
  EXPECT_THROW(fit_edmd(MatrixXd::Random(2, 5), MatrixXd::Random(3, 5)), Error);
  try {
    fit_edmd(MatrixXd::Zero(2, 5), MatrixXd::Zero(2, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "all singular values below cutoff");
  }
  // Rank-2 data in 4 dimensions truncates to r = 2.
  const MatrixXd Z = MatrixXd::Random(4, 2) * MatrixXd::Random(2, 30);
  EXPECT_EQ(fit_edmd(Z, Z).rank(), 2);
}

TEST(Edmd, ExactModesAreEigenvectorsOnFullRankData) {
  const MatrixXd M = bench::drss(4, 0, 3).A;
  const MatrixXd Z = MatrixXd::Random(4, 30);
  const auto res = fit_edmd(Z, M * Z);
  for (Index j = 0; j < res.rank(); ++j) {
    const VectorXcd v = res.exact_modes.col(j);
    EXPECT_LT((M.cast<cdouble>() * v - res.eigen.lambdas(j) * v).norm(), 1e-9 * v.norm());
  }
}

class DiagonalDmd : public ::testing::Test {
 protected:
  void SetUp() override {
    Eigen::Matrix2d A;
    A << 0.9, 0, 0, 0.5;
    const MatrixXd t1 = bench::iterate_linear(A, Eigen::Vector2d(1, 0), 10);
    const MatrixXd t2 = bench::iterate_linear(A, Eigen::Vector2d(0, 1), 10);
    stack_pairs({t1, t2}, X, Xp);
  }
  MatrixXd X, Xp;
};

TEST_F(DiagonalDmd, RecoversEigenvalues) {
  const auto res = fit_dmd(X, Xp);
  ASSERT_EQ(res.rank(), 2);
  EXPECT_LT(std::abs(res.eigen.lambdas(0) - 0.9), 1e-10);
  EXPECT_LT(std::abs(res.eigen.lambdas(1) - 0.5), 1e-10);
  const auto direct = oracle::sorted_real_eigs(oracle::pinv_operator(X, Xp));
  EXPECT_NEAR(direct[0], 0.5, 1e-10);
  EXPECT_NEAR(direct[1], 0.9, 1e-10);
}

TEST_F(DiagonalDmd, RankOneKeepsDominantMode) {
  const auto res = fit_dmd(X, Xp, {{1}, 1.0});
  ASSERT_EQ(res.rank(), 1);
  // Oracle: the leading left singular vector of X, computed separately.
  Eigen::JacobiSVD<MatrixXd> svd(X, Eigen::ComputeThinU);
  const VectorXd u = svd.matrixU().col(0);
  const double lam = u.dot(oracle::pinv_operator(X, Xp) * u);
  EXPECT_NEAR(res.eigen.lambdas(0).real(), lam, 1e-10);
  EXPECT_NEAR(res.eigen.lambdas(0).real(), 0.9, 1e-10);
}

TEST_F(DiagonalDmd, DmdEqualsEdmdOnIdentityLifting) {
  const auto a = fit_dmd(X, Xp);
  const auto b = fit_edmd(make_identity(2)->lift_columns(X), make_identity(2)->lift_columns(Xp));
  EXPECT_EQ(a.eigen.lambdas, b.eigen.lambdas);
}

TEST(Dmd, ConstantTrajectory) {
  const MatrixXd traj = MatrixXd::Constant(6, 2, 0.7);
  MatrixXd X, Xp;
  stack_pairs({traj}, X, Xp);
  const auto res = fit_dmd(X, Xp);
  ASSERT_EQ(res.rank(), 1);
  EXPECT_NEAR(std::abs(res.eigen.lambdas(0) - 1.0), 0.0, 1e-12);
  // Centered, the data vanish.
  const MatrixXd centered = X.colwise() - X.rowwise().mean();
  EXPECT_THROW(fit_dmd(centered, centered), Error);
}

TEST(Edmdc, ScalarSystem) {
  std::mt19937 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd Z(1, 30), U(1, 30);
  for (Index j = 0; j < 30; ++j) {
    Z(0, j) = n(rng);
    U(0, j) = n(rng);
  }
  const MatrixXd Zp = 0.5 * Z + 1.0 * U;
  for (const auto& res : {fit_edmdc(Z, Zp, U), fit_dmdc(Z, Zp, U)}) {
    EXPECT_NEAR(res.A(0, 0), 0.5, 1e-10);
    EXPECT_NEAR((*res.B)(0, 0), 1.0, 1e-10);
  }
  const MatrixXd AB = oracle::pinv_operator_stacked(Z, U, Zp);
  EXPECT_NEAR(AB(0, 0), 0.5, 1e-10);
  EXPECT_NEAR(AB(0, 1), 1.0, 1e-10);
}

TEST(Edmdc, ZeroInputReducesToEdmd) {
  const MatrixXd M = bench::drss(3, 0, 7).A;
  const MatrixXd Z = MatrixXd::Random(3, 40);
  const MatrixXd Zp = M * Z;
  const auto c = fit_dmdc(Z, Zp, MatrixXd::Zero(1, 40));
  const auto u = fit_dmd(Z, Zp);
  EXPECT_LT((c.A - u.A).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(c.B->norm(), 1e-8 * c.A.norm());
}

TEST(Edmdc, DrssRecovery) {
  const auto ss = bench::drss(3, 1, 2024);
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd inputs(200, 1);
  for (Index k = 0; k < 200; ++k) inputs(k, 0) = n(rng);
  const MatrixXd traj = bench::iterate_linear(ss.A, VectorXd::Random(3), 200, ss.B, inputs);
  MatrixXd X, Xp;
  stack_pairs({traj}, X, Xp);
  const MatrixXd U = inputs.transpose();
  for (const auto& res : {fit_edmdc(X, Xp, U), fit_dmdc(X, Xp, U)}) {
    EXPECT_LT((res.A - ss.A).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((*res.B - ss.B).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Edmdc, OutputCompression) {
  const auto ss = bench::drss(4, 1, 11);
  MatrixXd inputs = MatrixXd::Random(80, 1);
  const MatrixXd traj = bench::iterate_linear(ss.A, VectorXd::Random(4), 80, ss.B, inputs);
  MatrixXd X, Xp;
  stack_pairs({traj}, X, Xp);
  const auto res = fit_dmdc(X, Xp, inputs.transpose(), {{}, 2, 1.0});
  EXPECT_EQ(res.rank(), 2);
  EXPECT_EQ(res.A.rows(), 4);
  EXPECT_EQ(res.B->rows(), 4);
}

TEST(Edmdc, Errors) {
  const MatrixXd Z = MatrixXd::Random(2, 10);
  EXPECT_THROW(fit_edmdc(Z, Z, MatrixXd(0, 10)), Error);
  EXPECT_THROW(fit_edmdc(Z, Z, MatrixXd::Random(1, 9)), Error);
  EXPECT_THROW(fit_edmdc(Z, Z, MatrixXd::Random(1, 10), {{4}, std::nullopt, 1.0}), Error);
}

TEST(Kdmd, PolynomialKernelMatchesQuadraticEdmd) {
  const auto data = bench::slow_manifold_grid(3, 12, 0.02);
  MatrixXd X, Xp;
  stack_pairs(data.trajectories, X, Xp);
  ASSERT_GE(X.cols(), 50);
  KernelConfig k;
  k.kind = KernelConfig::Kind::polynomial;
  k.degree = 2;
  k.offset = 1.0;
  const auto kd = fit_kdmd(X, Xp, k, {{}, 0.02});
  const auto poly = make_polynomial(2, 2);
  const auto ed = fit_edmd(poly->lift_columns(X), poly->lift_columns(Xp), {{}, 0.02});
  ASSERT_EQ(kd.rank(), 6);
  EXPECT_LT(oracle::multiset_distance(to_vec(kd.eigen.lambdas), to_vec(ed.eigen.lambdas)), 1e-6);
}

TEST(Kdmd, IdentityData) {
  const MatrixXd X = MatrixXd::Random(2, 20);
  KernelConfig k;
  k.sigma = 1.0;
  const auto res = fit_kdmd(X, X, k);
  for (Index j = 0; j < res.rank(); ++j) EXPECT_LT(std::abs(res.eigen.lambdas(j) - 1.0), 1e-6);
}

TEST(Kdmd, WideGaussianApproachesLinearSpectrum) {
  const Eigen::Matrix2d A = bench::linear2d_matrix();
  std::vector<MatrixXd> trajs;
  for (int i = 0; i < 6; ++i) trajs.push_back(bench::iterate_linear(A, VectorXd::Random(2), 8));
  MatrixXd X, Xp;
  stack_pairs(trajs, X, Xp);
  KernelConfig k;
  k.sigma = 1e2;
  // The leading Gram directions are the constant and the linear features.
  const auto res = fit_kdmd(X, Xp, k, {{3}, 1.0});
  std::vector<cdouble> got = to_vec(res.eigen.lambdas);
  EXPECT_LT(oracle::distance_to_set(0.8, got), 1e-3);
  EXPECT_LT(oracle::distance_to_set(0.7, got), 1e-3);
  EXPECT_LT(oracle::distance_to_set(1.0, got), 1e-3);
}

TEST(Kdmd, RankBeyondSupportNeedsRegularization) {
  const MatrixXd X = MatrixXd::Random(1, 30);
  KernelConfig k;
  k.kind = KernelConfig::Kind::polynomial;
  k.degree = 1;
  EXPECT_THROW(fit_kdmd(X, X, k, {{5}, 1.0}), Error);
  k.reg_eps = 1e-6;
  EXPECT_NO_THROW(fit_kdmd(X, X, k, {{5}, 1.0}));
}

TEST(Hankel, PureCosine) {
  const double omega = 0.7, dt = 0.1;
  TrajectoryDataset data;
  data.dt = dt;
  MatrixXd x(60, 1);
  for (Index k = 0; k < 60; ++k) x(k, 0) = std::cos(omega * k * dt);
  data.trajectories = {x};
  const auto res = fit_hankel(data, 1);
  EXPECT_EQ(res.method, "hdmd");
  const std::vector<cdouble> want = {std::polar(1.0, omega * dt), std::polar(1.0, -omega * dt)};
  EXPECT_LT(oracle::multiset_distance(to_vec(res.eigen.lambdas), want), 1e-8);
}

TEST(Hankel, TwoTones) {
  const double w1 = 0.5, w2 = 0.5 * std::numbers::sqrt2, dt = 0.1;
  TrajectoryDataset data;
  data.dt = dt;
  MatrixXd x(200, 1);
  for (Index k = 0; k < 200; ++k) x(k, 0) = std::cos(w1 * k * dt) + 0.5 * std::sin(w2 * k * dt);
  data.trajectories = {x};
  const auto res = fit_hankel(data, 3);
  ASSERT_EQ(res.rank(), 4);
  const std::vector<cdouble> want = {std::polar(1.0, w1 * dt), std::polar(1.0, -w1 * dt),
                                     std::polar(1.0, w2 * dt), std::polar(1.0, -w2 * dt)};
  EXPECT_LT(oracle::multiset_distance(to_vec(res.eigen.lambdas), want), 1e-6);
}

TEST(Hankel, ZeroDelaysIsDmd) {
  const MatrixXd traj = bench::iterate_linear(bench::linear2d_matrix(), Eigen::Vector2d(1, 1), 20);
  TrajectoryDataset data;
  data.trajectories = {traj};
  MatrixXd X, Xp;
  stack_pairs({traj}, X, Xp);
  EXPECT_EQ(fit_hankel(data, 0).A, fit_dmd(X, Xp).A);
}

TEST(Hankel, PairsNeverStraddleAndShortTrajectoriesFail) {
  TrajectoryDataset data;
  data.trajectories = {MatrixXd::Random(6, 1), MatrixXd::Random(7, 1)};
  const TimeDelayLibrary lib(1, 2);
  const auto pairs = lift_pairs(lib, data);
  EXPECT_EQ(pairs.Z.cols(), (6 - 3) + (7 - 3));
  // First pair of trajectory 1 starts from its own first window.
  EXPECT_EQ(pairs.Z(2, 3), data.trajectories[1](0, 0));
  EXPECT_THROW(fit_hankel(data, 5), Error);
}

TEST(Hankel, ControlledVariant) {
  const auto ss = bench::drss(2, 1, 5);
  MatrixXd inputs = MatrixXd::Random(61, 1);
  inputs(60, 0) = 0.0;
  TrajectoryDataset data;
  data.trajectories = {bench::iterate_linear(ss.A, VectorXd::Random(2), 60, ss.B, inputs)};
  data.inputs = {inputs};
  const auto res = fit_hankel(data, 0);
  EXPECT_EQ(res.method, "hdmdc");
  EXPECT_LT((res.A - ss.A).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(EigBiorthogonal, Diagonal) {
  Eigen::Matrix2d A;
  A << 0.9, 0, 0, 0.5;
  const auto es = eig_biorthogonal(A);
  EXPECT_EQ(es.lambdas(0), cdouble(0.9));
  EXPECT_EQ(es.lambdas(1), cdouble(0.5));
  EXPECT_LT((es.W_right - MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EigBiorthogonal, ScaledRotation) {
  const double rho = 0.8, th = 0.3;
  Eigen::Matrix2d A;
  A << rho * std::cos(th), -rho * std::sin(th), rho * std::sin(th), rho * std::cos(th);
  const auto es = eig_biorthogonal(A);
  EXPECT_LT(std::abs(es.lambdas(0) - std::polar(rho, -th)), 1e-14);
  EXPECT_LT(std::abs(es.lambdas(1) - std::polar(rho, th)), 1e-14);
}

TEST(EigBiorthogonal, RandomMatricesAreBiorthogonal) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd A = MatrixXd::Random(5, 5);
    const auto es = eig_biorthogonal(A);
    EXPECT_LE(biorthogonality_error(es), 1e-8);
    EXPECT_LE(eigen_residual(A, es), 1e-8 * A.norm());
    for (Index j = 1; j < 5; ++j)
      EXPECT_GE(std::abs(es.lambdas(j - 1)), std::abs(es.lambdas(j)) - 1e-15);
    // Conjugate pairs sit next to each other.
    for (Index j = 0; j < 5; ++j) {
      if (std::abs(es.lambdas(j).imag()) < 1e-12) continue;
      const bool before = j > 0 && std::abs(es.lambdas(j - 1) - std::conj(es.lambdas(j))) < 1e-12;
      const bool after = j < 4 && std::abs(es.lambdas(j + 1) - std::conj(es.lambdas(j))) < 1e-12;
      EXPECT_TRUE(before || after);
    }
  }
}

TEST(EigBiorthogonal, DefectiveMatrixIsFlagged) {
  Eigen::Matrix2d J;
  J << 0.5, 1.0, 0.0, 0.5;
  const auto es = eig_biorthogonal(J);
  ASSERT_FALSE(es.findings.empty());
  EXPECT_EQ(es.findings.front().kind, "defective");
}

TEST(Continuous, ConversionAndBranchCut) {
  EXPECT_LT(std::abs(std::exp(continuous_eigenvalue(0.9, 0.1) * 0.1) - 0.9), 1e-12);
  const cdouble neg = continuous_eigenvalue(-0.5, 1.0);
  EXPECT_NEAR(neg.imag(), std::numbers::pi, 1e-15);
  EXPECT_TRUE(on_branch_cut(-0.5));
  EXPECT_FALSE(on_branch_cut(cdouble(0.5, 0.1)));
  EXPECT_TRUE(std::isinf(continuous_eigenvalue(0.0, 1.0).real()));

  const MatrixXd A = bench::drss(6, 0, 31).A;
  const auto res = fit_dmd(MatrixXd::Random(6, 30), A * MatrixXd::Random(6, 30), {{}, 0.05});
  for (Index j = 0; j < res.rank(); ++j) {
    if (res.eigen.branch_cut[static_cast<std::size_t>(j)]) continue;
    EXPECT_LT(std::abs(std::exp(res.eigen.mus(j) * 0.05) - res.eigen.lambdas(j)), 1e-12);
  }
}

TEST(Regression, EigenResidualInvariantAcrossMethods) {
  const auto data = bench::slow_manifold_grid(3, 30, 0.02);
  MatrixXd X, Xp;
  stack_pairs(data.trajectories, X, Xp);
  const auto poly = make_polynomial(2, 3);
  const auto res = fit_edmd(poly->lift_columns(X), poly->lift_columns(Xp));
  EXPECT_LE(eigen_residual(res.A, res.eigen), 1e-8 * res.A.norm());
  KernelConfig k;
  k.sigma = 0.7;
  k.reg_eps = 1e-8;
  const auto kd = fit_kdmd(X, Xp, k, {{10}, 0.02});
  EXPECT_LE(eigen_residual(kd.A, kd.eigen), 1e-8 * kd.A.norm());
}

}  // namespace
}  // namespace koopman
