#pragma once

// Time-derivative estimates of uniformly sampled signals.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/FFT>

#include "koopman/error.hpp"
#include "koopman/types.hpp"

namespace koopman {

enum class DiffMethod { fd2, fd4, savitzky_golay, spectral, spline, total_variation };

inline DiffMethod diff_method_from_string(const std::string& s) {
  if (s == "fd2" || s == "finite_difference") return DiffMethod::fd2;
  if (s == "fd4") return DiffMethod::fd4;
  if (s == "savitzky_golay" || s == "sg") return DiffMethod::savitzky_golay;
  if (s == "spectral") return DiffMethod::spectral;
  if (s == "spline") return DiffMethod::spline;
  if (s == "total_variation" || s == "tv") return DiffMethod::total_variation;
  throw Error(ErrorKind::config, "unknown differentiation method '" + s + "'");
}

struct DifferentiationConfig {
  DiffMethod method = DiffMethod::fd2;
  int window = 7;           // savitzky_golay, odd and >= 5
  double smoothing = 0.0;   // spline roughness penalty; 0 interpolates
  double tv_lambda = 1e-4;  // total_variation
  int tv_iters = 100;       // total_variation
  bool periodic = false;    // required for spectral
};

namespace diff_detail {

inline constexpr double kTvEpsilon = 1e-8;

inline Index min_samples(const DifferentiationConfig& cfg) {
  switch (cfg.method) {
    case DiffMethod::fd2: return 3;
    case DiffMethod::fd4: return 5;
    case DiffMethod::savitzky_golay: return cfg.window;
    case DiffMethod::spectral: return 4;
    case DiffMethod::spline: return 4;
    case DiffMethod::total_variation: return 3;
  }
  return 3;
}

inline VectorXd fd2(const VectorXd& x, double h) {
  const Index m = x.size();
  VectorXd d(m);
  d(0) = (-3.0 * x(0) + 4.0 * x(1) - x(2)) / (2.0 * h);
  for (Index i = 1; i + 1 < m; ++i) d(i) = (x(i + 1) - x(i - 1)) / (2.0 * h);
  d(m - 1) = (3.0 * x(m - 1) - 4.0 * x(m - 2) + x(m - 3)) / (2.0 * h);
  return d;
}

inline VectorXd fd4(const VectorXd& x, double h) {
  const Index m = x.size();
  VectorXd d = fd2(x, h);
  for (Index i = 2; i + 2 < m; ++i)
    d(i) = (-x(i + 2) + 8.0 * x(i + 1) - 8.0 * x(i - 1) + x(i - 2)) / (12.0 * h);
  return d;
}

/// Cubic least-squares fit over each window; the derivative of the fit at
/// the window center (or at the boundary point, using the nearest full window).
inline VectorXd savitzky_golay(const VectorXd& x, double h, int window) {
  const Index m = x.size();
  const Index half = window / 2;
  // Vandermonde in offsets s = -half..half (units of h), basis 1, s, s^2, s^3.
  MatrixXd V(window, 4);
  for (Index r = 0; r < window; ++r) {
    const double s = static_cast<double>(r - half);
    V.row(r) << 1.0, s, s * s, s * s * s;
  }
  // coeffs = pinv(V) * window_values
  const MatrixXd pinv = V.completeOrthogonalDecomposition().pseudoInverse();
  // Row p: weights giving the fitted derivative at offset position p.
  MatrixXd weights(window, window);
  for (Index p = 0; p < window; ++p) {
    const double s = static_cast<double>(p - half);
    Eigen::RowVector4d dbasis(0.0, 1.0, 2.0 * s, 3.0 * s * s);
    weights.row(p) = dbasis * pinv;
  }
  VectorXd d(m);
  for (Index i = 0; i < m; ++i) {
    Index start = i - half;
    if (start < 0) start = 0;
    if (start + window > m) start = m - window;
    d(i) = weights.row(i - start).dot(x.segment(start, window)) / h;
  }
  return d;
}

inline VectorXd spectral(const VectorXd& x, double h) {
  const Index m = x.size();
  Eigen::FFT<double> fft;
  std::vector<double> in(x.data(), x.data() + m);
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, in);
  freq.resize(static_cast<std::size_t>(m));
  // fwd on real input may return only the half spectrum; rebuild the full one.
  const double L = h * static_cast<double>(m);
  for (Index k = 0; k < m; ++k) {
    Index kk = k <= m / 2 ? k : k - m;
    if (m % 2 == 0 && k == m / 2) kk = 0;  // Nyquist contributes nothing
    const double omega = 2.0 * std::numbers::pi * static_cast<double>(kk) / L;
    freq[static_cast<std::size_t>(k)] *= std::complex<double>(0.0, omega);
  }
  std::vector<std::complex<double>> out;
  fft.inv(out, freq);
  VectorXd d(m);
  for (Index k = 0; k < m; ++k) d(k) = out[static_cast<std::size_t>(k)].real();
  return d;
}

/// Cubic smoothing spline minimizing sum (x_i - g(t_i))^2 + alpha * int g''^2
/// (Reinsch form on a uniform grid, natural boundary conditions), then the
/// analytic derivative at the knots.
inline VectorXd spline(const VectorXd& x, double h, double alpha) {
  const Index m = x.size();
  const Index k = m - 2;  // interior second derivatives gamma_1..gamma_{m-2}
  using Sparse = Eigen::SparseMatrix<double>;
  Sparse Q(m, k), R(k, k);
  std::vector<Eigen::Triplet<double>> tq, tr;
  for (Index j = 0; j < k; ++j) {
    tq.emplace_back(j, j, 1.0 / h);
    tq.emplace_back(j + 1, j, -2.0 / h);
    tq.emplace_back(j + 2, j, 1.0 / h);
    tr.emplace_back(j, j, 2.0 * h / 3.0);
    if (j + 1 < k) {
      tr.emplace_back(j, j + 1, h / 6.0);
      tr.emplace_back(j + 1, j, h / 6.0);
    }
  }
  Q.setFromTriplets(tq.begin(), tq.end());
  R.setFromTriplets(tr.begin(), tr.end());
  const Sparse lhs = R + alpha * Sparse(Q.transpose() * Q);
  Eigen::SimplicialLDLT<Sparse> solver(lhs);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::data, "spline system factorization failed");
  const VectorXd gamma_inner = solver.solve(Q.transpose() * x);
  const VectorXd g = x - alpha * (Q * gamma_inner);
  VectorXd gamma = VectorXd::Zero(m);
  gamma.segment(1, k) = gamma_inner;

  VectorXd d(m);
  for (Index i = 0; i + 1 < m; ++i)
    d(i) = (g(i + 1) - g(i)) / h - h / 6.0 * (2.0 * gamma(i) + gamma(i + 1));
  d(m - 1) = (g(m - 1) - g(m - 2)) / h + h / 6.0 * (gamma(m - 2) + 2.0 * gamma(m - 1));
  return d;
}

/// minimize 1/2 |A u - (x - x_0)|^2 + lambda |D u|_1 by iteratively
/// reweighted least squares, A = trapezoidal cumulative integral,
/// D = first difference, |v| smoothed as sqrt(v^2 + eps).
inline VectorXd total_variation(const VectorXd& x, double h, double lambda, int iters) {
  const Index m = x.size();
  MatrixXd A = MatrixXd::Zero(m, m);
  for (Index i = 1; i < m; ++i) {
    A(i, 0) = 0.5 * h;
    for (Index j = 1; j < i; ++j) A(i, j) = h;
    A(i, i) = 0.5 * h;
  }
  MatrixXd D = MatrixXd::Zero(m - 1, m);
  for (Index i = 0; i + 1 < m; ++i) {
    D(i, i) = -1.0;
    D(i, i + 1) = 1.0;
  }
  const VectorXd rhs = A.transpose() * (x.array() - x(0)).matrix();
  const MatrixXd AtA = A.transpose() * A;
  VectorXd u = fd2(x, h);
  for (int it = 0; it < iters; ++it) {
    const VectorXd du = D * u;
    const VectorXd w = (du.array().square() + kTvEpsilon).rsqrt();
    const MatrixXd lhs = AtA + lambda * D.transpose() * w.asDiagonal() * D;
    u = lhs.ldlt().solve(rhs);
  }
  return u;
}

}  // namespace diff_detail

/// Differentiates every column of X (rows = samples at times t).
inline MatrixXd differentiate(const DifferentiationConfig& cfg, const MatrixXd& X,
                              const VectorXd& t) {
  const Index m = X.rows();
  if (t.size() != m) throw Error(ErrorKind::data, "time vector length does not match samples");
  if (cfg.method == DiffMethod::savitzky_golay && (cfg.window < 5 || cfg.window % 2 == 0))
    throw Error(ErrorKind::config, "savitzky_golay window must be odd and >= 5");
  if (cfg.method == DiffMethod::total_variation && (cfg.tv_iters < 1 || !(cfg.tv_lambda > 0.0)))
    throw Error(ErrorKind::config, "total_variation needs tv_iters >= 1 and tv_lambda > 0");
  if (cfg.method == DiffMethod::spline && !(cfg.smoothing >= 0.0))
    throw Error(ErrorKind::config, "spline smoothing must be nonnegative");
  if (cfg.method == DiffMethod::spectral && !cfg.periodic)
    throw Error(ErrorKind::config, "spectral differentiation requires a periodic signal");
  if (m < diff_detail::min_samples(cfg))
    throw Error(ErrorKind::data, "too few samples for differentiation method (need " +
                                     std::to_string(diff_detail::min_samples(cfg)) + ")");

  const double h = (t(m - 1) - t(0)) / static_cast<double>(m - 1);
  if (!(h > 0.0)) throw Error(ErrorKind::data, "time stamps must be increasing");
  for (Index i = 1; i < m; ++i)
    if (std::abs((t(i) - t(i - 1)) - h) > 1e-8 * std::abs(h))
      throw Error(ErrorKind::data, "time stamps are not uniformly spaced");

  MatrixXd out(m, X.cols());
  for (Index c = 0; c < X.cols(); ++c) {
    const VectorXd x = X.col(c);
    switch (cfg.method) {
      case DiffMethod::fd2: out.col(c) = diff_detail::fd2(x, h); break;
      case DiffMethod::fd4: out.col(c) = diff_detail::fd4(x, h); break;
      case DiffMethod::savitzky_golay:
        out.col(c) = diff_detail::savitzky_golay(x, h, cfg.window);
        break;
      case DiffMethod::spectral: out.col(c) = diff_detail::spectral(x, h); break;
      case DiffMethod::spline: out.col(c) = diff_detail::spline(x, h, cfg.smoothing); break;
      case DiffMethod::total_variation:
        out.col(c) = diff_detail::total_variation(x, h, cfg.tv_lambda, cfg.tv_iters);
        break;
    }
  }
  return out;
}

}  // namespace koopman
