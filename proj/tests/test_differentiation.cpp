#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "koopman/differentiation.hpp"

namespace koopman {
namespace {

VectorXd grid(Index m, double t0, double h) {
  return VectorXd::LinSpaced(m, t0, t0 + h * static_cast<double>(m - 1));
}

DifferentiationConfig with(DiffMethod m) {
  DifferentiationConfig c;
  c.method = m;
  return c;
}

double max_rel_error(const VectorXd& got, const VectorXd& want, Index lo, Index hi) {
  double worst = 0.0;
  for (Index i = lo; i < hi; ++i)
    worst = std::max(worst, std::abs(got(i) - want(i)) / std::max(1.0, std::abs(want(i))));
  return worst;
}

TEST(Fd2, QuadraticThreePoints) {
  const VectorXd t = grid(3, 0.0, 1.0);
  const MatrixXd d = differentiate(with(DiffMethod::fd2), t.array().square().matrix(), t);
  EXPECT_EQ(d(1, 0), 2.0);
}

TEST(Fd2, ExactOnQuadraticsEverywhere) {
  // One-sided second-order end stencils are also exact on quadratics.
  const VectorXd t = grid(20, -1.3, 0.17);
  const VectorXd x = (3.0 * t.array().square() - 2.0 * t.array() + 0.5).matrix();
  const VectorXd want = (6.0 * t.array() - 2.0).matrix();
  const MatrixXd d = differentiate(with(DiffMethod::fd2), x, t);
  EXPECT_LE(max_rel_error(d.col(0), want, 0, 20), 1e-10);
}

TEST(Fd4, ExactOnQuarticsInterior) {
  const VectorXd t = grid(25, -1.0, 0.1);
  const VectorXd x = t.array().pow(4).matrix();
  const VectorXd want = (4.0 * t.array().pow(3)).matrix();
  const MatrixXd d = differentiate(with(DiffMethod::fd4), x, t);
  EXPECT_LE(max_rel_error(d.col(0), want, 2, 23), 1e-10);
}

TEST(SavitzkyGolay, ExactOnCubics) {
  const VectorXd t = grid(30, 0.0, 0.05);
  const VectorXd x = (t.array().pow(3) - t.array() + 2.0).matrix();
  const VectorXd want = (3.0 * t.array().square() - 1.0).matrix();
  auto cfg = with(DiffMethod::savitzky_golay);
  cfg.window = 7;
  const MatrixXd d = differentiate(cfg, x, t);
  // Boundary points use the nearest full window's cubic, which is exact too.
  EXPECT_LE(max_rel_error(d.col(0), want, 0, 30), 1e-10);
}

TEST(Spectral, SineOnSixtyFourPoints) {
  const Index m = 64;
  const double h = 2.0 * std::numbers::pi / m;
  const VectorXd t = grid(m, 0.0, h);
  auto cfg = with(DiffMethod::spectral);
  cfg.periodic = true;
  const MatrixXd d = differentiate(cfg, t.array().sin().matrix(), t);
  EXPECT_LT((d.col(0) - VectorXd(t.array().cos())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Spectral, BandLimitedOddLength) {
  const Index m = 33;
  const double L = 3.0;
  const VectorXd t = grid(m, 0.0, L / m);
  const double w = 2.0 * std::numbers::pi / L;
  const VectorXd x = (t.array() * 3.0 * w).cos() + 0.5 * (t.array() * 7.0 * w).sin();
  const VectorXd want =
      -3.0 * w * (t.array() * 3.0 * w).sin() + 3.5 * w * (t.array() * 7.0 * w).cos();
  auto cfg = with(DiffMethod::spectral);
  cfg.periodic = true;
  const MatrixXd d = differentiate(cfg, x, t);
  EXPECT_LT((d.col(0) - want).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Spline, InterpolatingSplineOnSmoothSignal) {
  const VectorXd t = grid(200, 0.0, 0.01);
  const MatrixXd d = differentiate(with(DiffMethod::spline), t.array().sin().matrix(), t);
  EXPECT_LT((d.col(0) - VectorXd(t.array().cos())).segment(5, 190).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Spline, LinearSignalIsExactForAnySmoothing) {
  const VectorXd t = grid(20, 0.0, 0.5);
  auto cfg = with(DiffMethod::spline);
  for (double s : {0.0, 0.1, 10.0}) {
    cfg.smoothing = s;
    const MatrixXd d = differentiate(cfg, (2.0 * t.array() + 1.0).matrix(), t);
    EXPECT_LT((d.col(0).array() - 2.0).abs().maxCoeff(), 1e-9) << s;
  }
}

TEST(TotalVariation, RampGivesUnitSlope) {
  const VectorXd t = grid(100, 0.0, 0.01);
  auto cfg = with(DiffMethod::total_variation);
  cfg.tv_lambda = 1e-4;
  cfg.tv_iters = 100;
  const MatrixXd d = differentiate(cfg, t, t);
  EXPECT_LT((d.col(0).array() - 1.0).abs().maxCoeff(), 1e-3);
}

TEST(Differentiate, ConstantSignalHasZeroDerivative) {
  const Index m = 32;
  const VectorXd t = grid(m, 0.0, 0.1);
  const MatrixXd x = MatrixXd::Constant(m, 2, 3.7);
  for (auto method : {DiffMethod::fd2, DiffMethod::fd4, DiffMethod::savitzky_golay,
                      DiffMethod::spectral, DiffMethod::spline, DiffMethod::total_variation}) {
    auto cfg = with(method);
    cfg.periodic = true;
    const MatrixXd d = differentiate(cfg, x, t);
    const double tol = method == DiffMethod::total_variation ? 1e-6 : 1e-12;
    EXPECT_LE(d.cwiseAbs().maxCoeff(), tol) << static_cast<int>(method);
  }
}

TEST(Differentiate, LinearInTheSignal) {
  const Index m = 40;
  const VectorXd t = grid(m, 0.0, 0.05);
  const MatrixXd X = MatrixXd::Random(m, 3), Y = MatrixXd::Random(m, 3);
  const double a = 1.7, b = -0.4;
  for (auto method : {DiffMethod::fd2, DiffMethod::fd4, DiffMethod::savitzky_golay,
                      DiffMethod::spectral}) {
    auto cfg = with(method);
    cfg.periodic = true;
    const MatrixXd lhs = differentiate(cfg, a * X + b * Y, t);
    const MatrixXd rhs = a * differentiate(cfg, X, t) + b * differentiate(cfg, Y, t);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9) << static_cast<int>(method);
  }
}

TEST(Differentiate, ColumnsAreIndependent) {
  const VectorXd t = grid(15, 0.0, 0.2);
  MatrixXd X(15, 2);
  X.col(0) = t.array().square();
  X.col(1) = t.array().sin();
  const MatrixXd d = differentiate(with(DiffMethod::fd4), X, t);
  EXPECT_EQ(d.col(1), differentiate(with(DiffMethod::fd4), X.col(1), t).col(0));
}

TEST(Differentiate, Errors) {
  const VectorXd t2 = grid(2, 0.0, 1.0);
  EXPECT_THROW(differentiate(with(DiffMethod::fd2), MatrixXd::Zero(2, 1), t2), Error);
  const VectorXd t4 = grid(4, 0.0, 1.0);
  EXPECT_THROW(differentiate(with(DiffMethod::fd4), MatrixXd::Zero(4, 1), t4), Error);

  VectorXd uneven = grid(10, 0.0, 1.0);
  uneven(5) += 1e-3;
  EXPECT_THROW(differentiate(with(DiffMethod::fd2), MatrixXd::Zero(10, 1), uneven), Error);

  const VectorXd t = grid(10, 0.0, 1.0);
  EXPECT_THROW(differentiate(with(DiffMethod::spectral), MatrixXd::Zero(10, 1), t), Error);

  auto sg = with(DiffMethod::savitzky_golay);
  sg.window = 6;
  EXPECT_THROW(differentiate(sg, MatrixXd::Zero(10, 1), t), Error);
  sg.window = 11;
  EXPECT_THROW(differentiate(sg, MatrixXd::Zero(10, 1), t), Error);

  auto tv = with(DiffMethod::total_variation);
  tv.tv_iters = 0;
  EXPECT_THROW(differentiate(tv, MatrixXd::Zero(10, 1), t), Error);

  EXPECT_THROW(diff_method_from_string("euler"), Error);
  EXPECT_EQ(diff_method_from_string("fd4"), DiffMethod::fd4);
}

}  // namespace
}  // namespace koopman
