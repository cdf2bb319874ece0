#include <cmath>

#include <gtest/gtest.h>

#include "koopman/benchmarks.hpp"
#include "koopman/regression.hpp"
#include "oracles.hpp"

namespace koopman {
namespace {

bench::SystemSpec decay() {
  return {"decay", 1, 0, {}, [](const VectorXd& x, const VectorXd&, double, const bench::Params&) {
            return VectorXd(-x);
          }};
}

TEST(Rk4, ExponentialDecay) {
  const MatrixXd traj = bench::integrate_rk4(decay(), VectorXd::Ones(1), 0.01, 100);
  ASSERT_EQ(traj.rows(), 101);
  EXPECT_NEAR(traj(100, 0), std::exp(-1.0), 1e-8);
}

TEST(Rk4, FourthOrderConvergence) {
  const double e1 =
      std::abs(bench::integrate_rk4(decay(), VectorXd::Ones(1), 0.1, 10)(10, 0) - std::exp(-1.0));
  const double e2 =
      std::abs(bench::integrate_rk4(decay(), VectorXd::Ones(1), 0.05, 20)(20, 0) - std::exp(-1.0));
  EXPECT_GE(e1 / e2, 12.0);
}

TEST(Rk4, ZeroFieldAndSlowManifold) {
  const bench::SystemSpec still{
      "still", 2, 0, {}, [](const VectorXd& x, const VectorXd&, double, const bench::Params&) {
        return VectorXd(VectorXd::Zero(x.size()));
      }};
  const MatrixXd flat = bench::integrate_rk4(still, Eigen::Vector2d(3, 4), 0.1, 10);
  for (Index k = 0; k <= 10; ++k) EXPECT_EQ(flat.row(k), flat.row(0));

  const MatrixXd sm =
      bench::integrate_rk4(bench::system("slow_manifold"), Eigen::Vector2d(1, 1), 0.02, 50);
  EXPECT_NEAR(sm(50, 0), std::exp(-0.05), 1e-8);
}

TEST(Rk4, ZeroOrderHoldInputs) {
  const bench::SystemSpec integrator{
      "int", 1, 1, {}, [](const VectorXd&, const VectorXd& u, double, const bench::Params&) {
        return VectorXd(u);
      }};
  MatrixXd u(3, 1);
  u << 1, 2, 3;
  const MatrixXd traj = bench::integrate_rk4(integrator, VectorXd::Zero(1), 0.5, 3, u);
  EXPECT_DOUBLE_EQ(traj(3, 0), 0.5 * (1 + 2 + 3));
  EXPECT_THROW(bench::integrate_rk4(integrator, VectorXd::Zero(1), 0.5, 4, u), Error);
}

TEST(Rk4, ErrorsOnBlowUp) {
  const bench::SystemSpec blow{"blow", 1, 0, {},
                               [](const VectorXd& x, const VectorXd&, double, const bench::Params&) {
                                 return VectorXd(x.array().square() * 1e300);
                               }};
  try {
    bench::integrate_rk4(blow, VectorXd::Constant(1, 1e10), 1.0, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
  EXPECT_THROW(bench::integrate_rk4(decay(), VectorXd::Ones(1), 0.0, 5), Error);
}

TEST(SystemRhs, CatalogValues) {
  const VectorXd none;
  EXPECT_EQ(bench::system_rhs("slow_manifold", Eigen::Vector2d(1, 1), none, 0.0),
            Eigen::Vector2d(-0.05, 0.0));
  const VectorXd l = bench::system_rhs("lorenz", Eigen::Vector3d(1, 1, 1), none, 0.0);
  EXPECT_EQ(l(0), 0.0);
  EXPECT_EQ(l(1), 26.0);
  EXPECT_NEAR(l(2), 1.0 - 8.0 / 3.0, 1e-15);
  EXPECT_EQ(bench::system_rhs("vdp_osc", Eigen::Vector2d(1, 0), VectorXd::Zero(1), 0.0),
            Eigen::Vector2d(0.0, -1.0));
  const VectorXd d = bench::system_rhs("forced_duffing", Eigen::Vector2d(1, 1), VectorXd::Ones(1), 0);
  EXPECT_DOUBLE_EQ(d(1), -0.5 + 1.0 - 1.0 + 1.0);
  EXPECT_EQ(bench::system_rhs("vdp_osc", Eigen::Vector2d(1, 1), VectorXd::Zero(1), 0.0, {{"mu", 0}}),
            Eigen::Vector2d(1.0, -1.0));
  EXPECT_THROW(bench::system_rhs("pendulum", Eigen::Vector2d(1, 1), none, 0.0), Error);
  EXPECT_THROW(bench::system_rhs("lorenz", Eigen::Vector3d(1, 1, 1), none, 0.0, {{"tau", 1}}), Error);
}

TEST(SystemRhs, FiniteOnUnitBall) {
  for (const auto& name : bench::catalog()) {
    const auto spec = bench::system(name);
    for (int trial = 0; trial < 200; ++trial) {
      VectorXd x = VectorXd::Random(spec.n);
      if (x.norm() > 1.0) x /= x.norm();
      EXPECT_TRUE(spec(x, VectorXd::Zero(spec.q), 0.0).allFinite()) << name;
    }
  }
}

TEST(Drss, StableForManySeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ss = bench::drss(5, 2, seed);
    Eigen::EigenSolver<MatrixXd> es(ss.A);
    EXPECT_LT(es.eigenvalues().cwiseAbs().maxCoeff(), 0.9);
    EXPECT_EQ(ss.B.rows(), 5);
    EXPECT_EQ(ss.B.cols(), 2);
  }
}

TEST(Drss, DeterministicAndEdgeCases) {
  const auto a = bench::drss(4, 1, 77), b = bench::drss(4, 1, 77);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.B, b.B);
  EXPECT_EQ(bench::drss(3, 0, 1).B.cols(), 0);
  EXPECT_THROW(bench::drss(3, 1, 1, 1.0), Error);
  EXPECT_THROW(bench::drss(3, 1, 1, 0.05), Error);
  EXPECT_THROW(bench::drss(0, 1, 1), Error);
}

TEST(Linear2d, StepAndDmd) {
  EXPECT_EQ(bench::linear2d_step(Eigen::Vector2d(1, 0)), Eigen::Vector2d(0.8, 0.0));
  const MatrixXd traj = bench::iterate_linear(bench::linear2d_matrix(), Eigen::Vector2d(1, 0.3), 30);
  const MatrixXd X = traj.topRows(30).transpose(), Xp = traj.bottomRows(30).transpose();
  const auto res = fit_dmd(X, Xp);
  EXPECT_LT(std::abs(res.eigen.lambdas(0) - 0.8), 1e-10);
  EXPECT_LT(std::abs(res.eigen.lambdas(1) - 0.7), 1e-10);
}

TEST(Torus, SignalAndHankelSpectrum) {
  const double dt = 0.1;
  const VectorXd t = VectorXd::LinSpaced(300, 0.0, 299 * dt);
  const MatrixXd s = bench::torus_signal(t);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.0);

  TrajectoryDataset data;
  data.dt = dt;
  data.trajectories = {s};
  const auto res = fit_hankel(data, 3);
  const VectorXd f = bench::default_torus_freqs();
  std::vector<cdouble> want;
  for (Index i = 0; i < 2; ++i) {
    want.push_back(std::polar(1.0, 2 * std::numbers::pi * f(i) * dt));
    want.push_back(std::polar(1.0, -2 * std::numbers::pi * f(i) * dt));
  }
  std::vector<cdouble> got(res.eigen.lambdas.data(),
                           res.eigen.lambdas.data() + res.eigen.lambdas.size());
  EXPECT_LT(oracle::multiset_distance(got, want), 1e-6);
  EXPECT_THROW(bench::torus_signal(t, VectorXd(), VectorXd()), Error);
}

}  // namespace
}  // namespace koopman
