#pragma once

// Best-fit linear operators on (lifted) snapshot pairs: DMD, EDMD, DMDc,
// EDMDc, kernel DMD and Hankel DMD, plus the biorthogonal eigen-analysis
// shared by all of them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "koopman/error.hpp"
#include "koopman/kernels.hpp"
#include "koopman/linalg.hpp"
#include "koopman/observables.hpp"
#include "koopman/types.hpp"

namespace koopman {

using cdouble = std::complex<double>;

/// Discrete and continuous eigenvalues with biorthogonal eigenvectors
/// (W_left^H W_right = I for distinct eigenvalues).
///
/// Order: decreasing |lambda|, then decreasing Re, then increasing Im, so a
/// complex-conjugate pair is adjacent with the negative imaginary part first.
struct EigenSystem {
  VectorXcd lambdas;
  VectorXcd mus;
  MatrixXcd W_right;
  MatrixXcd W_left;
  /// mu_j sits on the branch cut of the logarithm (negative real lambda) or
  /// lambda_j = 0; such mu are aliasing-ambiguous.
  std::vector<bool> branch_cut;
  std::vector<Finding> findings;

  Index size() const { return lambdas.size(); }
};

/// mu = ln(lambda) / dt on the principal branch; lambda = 0 maps to -inf.
inline cdouble continuous_eigenvalue(cdouble lambda, double dt) {
  if (lambda == cdouble(0.0, 0.0))
    return {-std::numeric_limits<double>::infinity(), 0.0};
  return std::log(lambda) / dt;
}

inline bool on_branch_cut(cdouble lambda) {
  return lambda == cdouble(0.0, 0.0) ||
         (lambda.real() < 0.0 && std::abs(lambda.imag()) <= 1e-14 * std::abs(lambda));
}

/// Fills mus and branch-cut flags for sample interval dt.
inline void assign_continuous(EigenSystem& es, double dt) {
  es.mus.resize(es.lambdas.size());
  es.branch_cut.assign(static_cast<std::size_t>(es.lambdas.size()), false);
  for (Index j = 0; j < es.lambdas.size(); ++j) {
    es.mus(j) = continuous_eigenvalue(es.lambdas(j), dt);
    if (on_branch_cut(es.lambdas(j))) {
      es.branch_cut[static_cast<std::size_t>(j)] = true;
      es.findings.push_back({es.lambdas(j) == cdouble(0.0, 0.0) ? "zero-eigenvalue"
                                                                 : "branch-cut",
                             es.lambdas(j) == cdouble(0.0, 0.0)
                                 ? "lambda = 0; mu reported as -inf"
                                 : "negative real lambda; mu uses the principal branch",
                             -1, -1, static_cast<int>(j)});
    }
  }
}

/// Right and left eigenvectors of a real square matrix.
///
/// Each left eigenvector is scaled so its largest-modulus entry equals 1;
/// the matching right eigenvector is then rescaled to keep
/// W_left^H W_right = I. A (numerically) defective matrix gets a
/// "defective" finding and biorthogonality is not guaranteed.
inline EigenSystem eig_biorthogonal(const MatrixXd& A) {
  if (A.rows() != A.cols()) throw Error(ErrorKind::regression, "matrix must be square");
  if (A.rows() == 0) throw Error(ErrorKind::regression, "matrix is empty");
  if (!A.allFinite()) throw Error(ErrorKind::regression, "matrix contains non-finite values");
  const Index r = A.rows();

  Eigen::EigenSolver<MatrixXd> solver(A, true);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::regression, "eigen-decomposition did not converge");
  const VectorXcd raw_vals = solver.eigenvalues();
  const MatrixXcd raw_vecs = solver.eigenvectors();

  std::vector<Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const cdouble la = raw_vals(a), lb = raw_vals(b);
    if (std::abs(la) != std::abs(lb)) return std::abs(la) > std::abs(lb);
    if (la.real() != lb.real()) return la.real() > lb.real();
    return la.imag() < lb.imag();
  });

  EigenSystem es;
  es.lambdas.resize(r);
  es.W_right.resize(r, r);
  for (Index j = 0; j < r; ++j) {
    es.lambdas(j) = raw_vals(order[static_cast<std::size_t>(j)]);
    es.W_right.col(j) = raw_vecs.col(order[static_cast<std::size_t>(j)]);
  }

  Eigen::FullPivLU<MatrixXcd> lu(es.W_right);
  const double rcond = lu.rcond();
  if (!lu.isInvertible() || rcond < 1e-12) {
    es.findings.push_back({"defective",
                           "eigenvector matrix is (nearly) singular; biorthogonality "
                           "is not guaranteed"});
    es.W_left = es.W_right;  // best effort: unit eigenvectors of A^H below
    Eigen::ComplexEigenSolver<MatrixXcd> left(A.adjoint().cast<cdouble>());
    for (Index j = 0; j < r; ++j) {
      Index best = 0;
      double dist = std::numeric_limits<double>::infinity();
      for (Index k = 0; k < r; ++k) {
        const double d = std::abs(std::conj(left.eigenvalues()(k)) - es.lambdas(j));
        if (d < dist) {
          dist = d;
          best = k;
        }
      }
      es.W_left.col(j) = left.eigenvectors().col(best);
    }
  } else {
    es.W_left = lu.inverse().adjoint();
  }

  for (Index j = 0; j < r; ++j) {
    Index imax = 0;
    for (Index k = 1; k < r; ++k)
      if (std::abs(es.W_left(k, j)) > std::abs(es.W_left(imax, j))) imax = k;
    const cdouble e = es.W_left(imax, j);
    if (e == cdouble(0.0, 0.0)) continue;
    es.W_left.col(j) /= e;
    es.W_right.col(j) *= std::conj(e);
  }
  return es;
}

/// max_ij |(W_left^H W_right - I)_ij|
inline double biorthogonality_error(const EigenSystem& es) {
  const MatrixXcd P = es.W_left.adjoint() * es.W_right;
  return (P - MatrixXcd::Identity(P.rows(), P.cols())).cwiseAbs().maxCoeff();
}

/// max_j |A w_j - lambda_j w_j| / |w_j|
inline double eigen_residual(const MatrixXd& A, const EigenSystem& es) {
  double worst = 0.0;
  for (Index j = 0; j < es.size(); ++j) {
    const VectorXcd w = es.W_right.col(j);
    const double nw = w.norm();
    if (nw == 0.0) continue;
    worst = std::max(worst, (A.cast<cdouble>() * w - es.lambdas(j) * w).norm() / nw);
  }
  return worst;
}

// ---------------------------------------------------------------------------

struct RegressionResult {
  std::string method;
  /// Operator on lifted coordinates: N x N (r x r for kernel DMD).
  MatrixXd A;
  std::optional<MatrixXd> B;
  /// r x r operator in the reduced basis.
  MatrixXd A_reduced;
  /// Leading factors of the regressor's input SVD (V is dropped for
  /// kernel DMD, where it would be m x m).
  TruncatedSvd svd;
  EigenSystem eigen;
  /// Exact-DMD modes Zprime V S^-1 w / lambda (projected modes where lambda = 0).
  MatrixXcd exact_modes;
  /// |Zprime - A Z - B U|_F on the training pairs.
  double residual = 0.0;
  /// Smallest singular value of the lifted training matrix that was kept.
  double sigma_min = 0.0;
  /// Kernel DMD only: the induced feature library z(x) = Q^T k(X, x).
  LibraryPtr kernel_library;
  std::vector<Finding> findings;

  Index rank() const { return eigen.size(); }
  bool controlled() const { return B.has_value(); }
};

struct FitOptions {
  RankSpec rank;
  double dt = 1.0;
};

struct ControlFitOptions {
  RankSpec rank_in;
  /// When set and below N, X' is compressed onto its leading rank_out
  /// left singular vectors.
  std::optional<Index> rank_out;
  double dt = 1.0;
};

namespace regression_detail {

inline void check_pairs(const MatrixXd& Z, const MatrixXd& Zprime) {
  if (Z.rows() != Zprime.rows() || Z.cols() != Zprime.cols())
    throw Error(ErrorKind::regression, "snapshot matrices must have identical shapes");
  if (Z.cols() < 2) throw Error(ErrorKind::regression, "need at least 2 snapshot pairs");
}

inline void finish_eigen(RegressionResult& res, const EigenSystem& reduced, const MatrixXd& basis,
                         double dt) {
  res.eigen = reduced;
  res.eigen.W_right = basis.cast<cdouble>() * reduced.W_right;
  res.eigen.W_left = basis.cast<cdouble>() * reduced.W_left;
  assign_continuous(res.eigen, dt);
  res.findings.insert(res.findings.end(), res.eigen.findings.begin(), res.eigen.findings.end());
}

}  // namespace regression_detail

/// Truncated-SVD EDMD: Z ~ Ur Sr Vr^T, A_reduced = Ur^T Zprime Vr Sr^-1,
/// A = Ur A_reduced Ur^T (the least-squares operator restricted to range Ur).
inline RegressionResult fit_edmd(const MatrixXd& Z, const MatrixXd& Zprime,
                                 const FitOptions& opts = {}) {
  regression_detail::check_pairs(Z, Zprime);
  RegressionResult res;
  res.method = "edmd";
  res.svd = truncated_svd(Z, opts.rank);
  const auto& f = res.svd;
  const MatrixXd G = Zprime * f.V * f.S.cwiseInverse().asDiagonal();  // N x r
  res.A_reduced = f.U.transpose() * G;
  res.A = f.U * res.A_reduced * f.U.transpose();

  const EigenSystem reduced = eig_biorthogonal(res.A_reduced);
  regression_detail::finish_eigen(res, reduced, f.U, opts.dt);

  res.exact_modes.resize(Z.rows(), res.rank());
  const double scale = reduced.lambdas.size() ? std::abs(reduced.lambdas(0)) : 0.0;
  for (Index j = 0; j < res.rank(); ++j) {
    const cdouble lam = reduced.lambdas(j);
    if (std::abs(lam) <= 1e-14 * scale || lam == cdouble(0.0, 0.0))
      res.exact_modes.col(j) = res.eigen.W_right.col(j);
    else
      res.exact_modes.col(j) = G.cast<cdouble>() * reduced.W_right.col(j) / lam;
  }
  res.residual = (Zprime - res.A * Z).norm();
  res.sigma_min = f.S(f.rank() - 1);
  return res;
}

/// SVD-based exact DMD on raw states (EDMD with identity observables).
inline RegressionResult fit_dmd(const MatrixXd& X, const MatrixXd& Xprime,
                                const FitOptions& opts = {}) {
  RegressionResult res = fit_edmd(X, Xprime, opts);
  res.method = "dmd";
  return res;
}

/// EDMD with control: [A B] = Zprime pinv([Z; U]) via a truncated SVD of the
/// stacked matrix. Only the A, B blocks are identified; the input rows of the
/// joint operator are not modeled.
inline RegressionResult fit_edmdc(const MatrixXd& Z, const MatrixXd& Zprime, const MatrixXd& U,
                                  const ControlFitOptions& opts = {}) {
  regression_detail::check_pairs(Z, Zprime);
  const Index N = Z.rows(), q = U.rows();
  if (q == 0) throw Error(ErrorKind::regression, "no inputs given; use fit_edmd instead");
  if (U.cols() != Z.cols())
    throw Error(ErrorKind::regression, "input matrix must have one column per snapshot pair");
  if (opts.rank_in.rank && *opts.rank_in.rank > N + q)
    throw Error(ErrorKind::regression, "rank_in exceeds state plus input dimension");

  MatrixXd Omega(N + q, Z.cols());
  Omega << Z, U;
  RegressionResult res;
  res.method = "edmdc";
  res.svd = truncated_svd(Omega, opts.rank_in);
  const auto& f = res.svd;
  const MatrixXd G = Zprime * f.V * f.S.cwiseInverse().asDiagonal();  // N x r_in
  const MatrixXd U1 = f.U.topRows(N), U2 = f.U.bottomRows(q);

  MatrixXd basis = MatrixXd::Identity(N, N);
  if (opts.rank_out && *opts.rank_out < N) basis = truncated_svd(Zprime, {opts.rank_out}).U;
  res.A_reduced = basis.transpose() * G * U1.transpose() * basis;
  res.A = basis * res.A_reduced * basis.transpose();
  res.B = basis * (basis.transpose() * G * U2.transpose());

  const EigenSystem reduced = eig_biorthogonal(res.A_reduced);
  regression_detail::finish_eigen(res, reduced, basis, opts.dt);
  res.exact_modes = res.eigen.W_right;
  res.residual = (Zprime - res.A * Z - *res.B * U).norm();
  res.sigma_min = f.S(f.rank() - 1);
  return res;
}

/// DMD with control on raw states, including the output-SVD compression
/// when rank_out < n.
inline RegressionResult fit_dmdc(const MatrixXd& X, const MatrixXd& Xprime, const MatrixXd& U,
                                 const ControlFitOptions& opts = {}) {
  RegressionResult res = fit_edmdc(X, Xprime, U, opts);
  res.method = "dmdc";
  return res;
}

/// Kernel DMD.
///
/// With Gram matrices G_ij = k(x_i, x_j), T_ij = k(x'_i, x_j) and the rank-r
/// principal eigenspace G ~ Q L Q^T, the reduced operator is
/// M = (L + reg_eps m I)^-1 Q^T T Q. The model works in the real features
/// z(x) = Q^T [k(x, x_i)]_i, where the dynamics are A = M^T; eigenfunctions
/// are phi_j(x) = sum_i alpha_ji k(x, x_i) with alpha_j = Q conj(w_left_j).
///
/// The rank cutoff applies to the eigenvalues of G (not their square roots).
inline RegressionResult fit_kdmd(const MatrixXd& X, const MatrixXd& Xprime,
                                 const KernelConfig& kernel, const FitOptions& opts = {}) {
  regression_detail::check_pairs(X, Xprime);
  kernel.check();
  const Index m = X.cols();
  const MatrixXd G = gram_matrix(kernel, X, X);
  const MatrixXd T = gram_matrix(kernel, Xprime, X);
  Eigen::SelfAdjointEigenSolver<MatrixXd> sym(G);
  if (sym.info() != Eigen::Success)
    throw Error(ErrorKind::regression, "Gram matrix eigen-decomposition failed");
  const VectorXd evals = sym.eigenvalues().reverse();
  const MatrixXd evecs = sym.eigenvectors().rowwise().reverse();
  if (!(evals(0) > 0.0)) throw Error(ErrorKind::regression, "Gram matrix is zero");

  Index supported = 0;
  while (supported < m && evals(supported) > opts.rank.cutoff * evals(0)) ++supported;
  Index r = supported;
  if (opts.rank.rank) {
    if (*opts.rank.rank < 1) throw Error(ErrorKind::regression, "rank must be at least 1");
    if (*opts.rank.rank > supported) {
      if (kernel.reg_eps == 0.0)
        throw Error(ErrorKind::regression,
                    "Gram matrix is singular at the requested rank; set reg_eps > 0 "
                    "(regularization) or lower the rank");
      r = std::min(*opts.rank.rank, m);
    } else {
      r = *opts.rank.rank;
    }
  }

  const MatrixXd Q = evecs.leftCols(r);
  const VectorXd L = evals.head(r);
  const VectorXd denom = L.array() + kernel.reg_eps * static_cast<double>(m);
  if ((denom.array() <= 0.0).any())
    throw Error(ErrorKind::regression, "regularized Gram matrix is singular; increase reg_eps");
  const MatrixXd M = denom.cwiseInverse().asDiagonal() * (Q.transpose() * T * Q);

  RegressionResult res;
  res.method = "kdmd";
  res.A_reduced = M.transpose();
  res.A = res.A_reduced;
  res.svd.U = Q;
  res.svd.S = L;
  const EigenSystem es = eig_biorthogonal(res.A);
  regression_detail::finish_eigen(res, es, MatrixXd::Identity(r, r), opts.dt);
  res.exact_modes = res.eigen.W_right;
  res.kernel_library = std::make_shared<KernelFeatureLibrary>(kernel, X, Q.transpose());

  const MatrixXd P = Q.transpose() * G;        // z(x_j) as columns
  const MatrixXd Pprime = Q.transpose() * T.transpose();  // z(x'_j)
  res.residual = (Pprime - res.A * P).norm();
  res.sigma_min = std::abs(L(r - 1));
  return res;
}

// ---------------------------------------------------------------------------

/// Snapshot pairs after lifting: each trajectory is lifted as a whole and
/// consecutive lifted columns become pairs, so delay windows and pairs never
/// straddle trajectory boundaries. U holds the input at the time of the most
/// recent sample in each X window.
struct LiftedPairs {
  MatrixXd Z;
  MatrixXd Zprime;
  std::optional<MatrixXd> U;
  std::vector<Index> pairs_per_trajectory;
};

inline LiftedPairs lift_pairs(const ObservableLibrary& library, const TrajectoryDataset& data) {
  check_dataset(data);
  const Index d = library.delays();
  if (data.state_dim() != library.n_input())
    throw Error(ErrorKind::lifting, "data state dimension does not match observables");
  Index m = 0;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const Index T = data.trajectories[i].rows();
    if (T < d + 2)
      throw Error(ErrorKind::data, "trajectory " + std::to_string(i) +
                                       " too short for the requested delays (need " +
                                       std::to_string(d + 2) + " samples)");
    m += T - d - 1;
  }
  LiftedPairs out;
  out.Z.resize(library.n_output(), m);
  out.Zprime.resize(library.n_output(), m);
  if (data.has_inputs()) out.U = MatrixXd(data.input_dim(), m);
  Index col = 0;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const MatrixXd lifted = library.lift_trajectory(data.trajectories[i]);
    const Index count = lifted.cols() - 1;
    out.Z.middleCols(col, count) = lifted.leftCols(count);
    out.Zprime.middleCols(col, count) = lifted.rightCols(count);
    if (out.U)
      out.U->middleCols(col, count) = data.inputs[i].middleRows(d, count).transpose();
    out.pairs_per_trajectory.push_back(count);
    col += count;
  }
  return out;
}

/// Hankel DMD: delay embedding with `delays` lags followed by DMD, or DMDc
/// when the dataset carries inputs.
inline RegressionResult fit_hankel(const TrajectoryDataset& data, Index delays,
                                   const RankSpec& rank = {}) {
  check_dataset(data);
  const TimeDelayLibrary library(data.state_dim(), delays);
  const LiftedPairs pairs = lift_pairs(library, data);
  RegressionResult res;
  if (pairs.U) {
    res = fit_dmdc(pairs.Z, pairs.Zprime, *pairs.U, {rank, std::nullopt, data.dt});
    res.method = "hdmdc";
  } else {
    res = fit_dmd(pairs.Z, pairs.Zprime, {rank, data.dt});
    res.method = "hdmd";
  }
  return res;
}

}  // namespace koopman
