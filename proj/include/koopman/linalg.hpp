#pragma once

#include <algorithm>
#include <optional>

#include <Eigen/Dense>

#include "koopman/error.hpp"

namespace koopman {

/// Default relative singular-value cutoff: keep sigma_i / sigma_1 > 1e-10.
inline constexpr double kDefaultSvdCutoff = 1e-10;

/// Rank request for truncated factorizations. The effective rank is
/// min(rank, #{sigma_i > cutoff * sigma_1}).
struct RankSpec {
  std::optional<Eigen::Index> rank;
  double cutoff = kDefaultSvdCutoff;
};

/// Thin SVD M ~= U diag(S) V^T keeping `rank` leading triplets.
struct TruncatedSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd S;
  Eigen::MatrixXd V;

  Eigen::Index rank() const { return S.size(); }
};

inline TruncatedSvd truncated_svd(const Eigen::MatrixXd& M, const RankSpec& spec = {}) {
  if (M.size() == 0) throw Error(ErrorKind::regression, "cannot factor an empty matrix");
  if (!M.allFinite()) throw Error(ErrorKind::regression, "matrix contains non-finite values");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  Eigen::Index keep = 0;
  if (sv.size() > 0 && sv(0) > 0.0)
    while (keep < sv.size() && sv(keep) > spec.cutoff * sv(0)) ++keep;
  if (spec.rank) {
    if (*spec.rank < 1) throw Error(ErrorKind::regression, "rank must be at least 1");
    keep = std::min(keep, *spec.rank);
  }
  if (keep == 0) throw Error(ErrorKind::regression, "all singular values below cutoff");
  TruncatedSvd out;
  out.U = svd.matrixU().leftCols(keep);
  out.S = sv.head(keep);
  out.V = svd.matrixV().leftCols(keep);
  return out;
}

/// Minimum-norm least-squares solution of C * A = B (C = B * pinv(A)) with a
/// relative singular-value cutoff on A. `rank_deficient` reports whether any
/// singular direction of A was discarded.
inline Eigen::MatrixXd solve_right_pinv(const Eigen::MatrixXd& B, const Eigen::MatrixXd& A,
                                        double cutoff, bool* rank_deficient = nullptr) {
  const TruncatedSvd f = truncated_svd(A, RankSpec{std::nullopt, cutoff});
  if (rank_deficient) *rank_deficient = f.rank() < std::min(A.rows(), A.cols());
  return B * f.V * f.S.cwiseInverse().asDiagonal() * f.U.transpose();
}

}  // namespace koopman
