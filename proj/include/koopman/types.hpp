#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman/error.hpp"

namespace koopman {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Time-ordered state trajectories sharing one sample interval.
///
/// Each trajectory stores one sample per row (rows = time, columns = state
/// coordinates). Optional inputs are aligned row-for-row with their
/// trajectory. The struct itself performs no checking so that
/// validate_dataset() can report on arbitrary data; every consumer calls
/// check_dataset() first.
struct TrajectoryDataset {
  std::vector<MatrixXd> trajectories;
  double dt = 1.0;
  std::vector<MatrixXd> inputs;  // empty, or one per trajectory

  bool has_inputs() const { return !inputs.empty(); }
  Index state_dim() const {
    return trajectories.empty() ? 0 : trajectories.front().cols();
  }
  Index input_dim() const { return inputs.empty() ? 0 : inputs.front().cols(); }
};

/// Column-per-snapshot data matrices X, X' (and U) built from a dataset.
struct SnapshotPairs {
  MatrixXd X;
  MatrixXd Xprime;
  std::optional<MatrixXd> U;
  double dt = 1.0;
  /// Number of pairs contributed by each source trajectory, in order.
  std::vector<Index> pairs_per_trajectory;

  Index count() const { return X.cols(); }
};

/// Throws Error(data) unless the dataset satisfies the structural invariants
/// (nonempty, common state dimension, >= 2 samples each, aligned inputs,
/// positive dt).
inline void check_dataset(const TrajectoryDataset& data) {
  if (data.trajectories.empty()) throw Error(ErrorKind::data, "no trajectories");
  if (!(data.dt > 0.0) || !std::isfinite(data.dt))
    throw Error(ErrorKind::data, "dt must be positive");
  const Index n = data.trajectories.front().cols();
  if (n < 1) throw Error(ErrorKind::data, "state dimension must be at least 1");
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const auto& traj = data.trajectories[i];
    if (traj.cols() != n)
      throw Error(ErrorKind::data, "trajectory " + std::to_string(i) +
                                       " has state dimension " +
                                       std::to_string(traj.cols()) + ", expected " +
                                       std::to_string(n));
    if (traj.rows() < 2)
      throw Error(ErrorKind::data, "trajectory too short (trajectory " +
                                       std::to_string(i) + " has " +
                                       std::to_string(traj.rows()) +
                                       " sample(s), need at least 2)");
  }
  if (data.has_inputs()) {
    if (data.inputs.size() != data.trajectories.size())
      throw Error(ErrorKind::data, "inputs must be given for every trajectory");
    const Index q = data.inputs.front().cols();
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
      if (data.inputs[i].rows() != data.trajectories[i].rows())
        throw Error(ErrorKind::data, "input " + std::to_string(i) +
                                         " is not aligned with its trajectory");
      if (data.inputs[i].cols() != q)
        throw Error(ErrorKind::data, "inconsistent input dimension in input " +
                                         std::to_string(i));
    }
  }
}

/// Stacks consecutive samples into X (current) and X' (successor) columns.
/// Pairs never straddle trajectory boundaries; U holds the inputs at the
/// X timestamps.
inline SnapshotPairs build_snapshot_pairs(const TrajectoryDataset& data) {
  check_dataset(data);
  const Index n = data.state_dim();
  Index m = 0;
  for (const auto& traj : data.trajectories) m += traj.rows() - 1;

  SnapshotPairs pairs;
  pairs.dt = data.dt;
  pairs.X.resize(n, m);
  pairs.Xprime.resize(n, m);
  if (data.has_inputs()) pairs.U = MatrixXd(data.input_dim(), m);

  Index col = 0;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const auto& traj = data.trajectories[i];
    const Index count = traj.rows() - 1;
    pairs.X.middleCols(col, count) = traj.topRows(count).transpose();
    pairs.Xprime.middleCols(col, count) = traj.bottomRows(count).transpose();
    if (pairs.U) pairs.U->middleCols(col, count) = data.inputs[i].topRows(count).transpose();
    pairs.pairs_per_trajectory.push_back(count);
    col += count;
  }
  return pairs;
}

/// Inverse of build_snapshot_pairs for the state part: rebuilds each source
/// trajectory (rows = time) from its block of pairs.
inline std::vector<MatrixXd> split_pairs(const SnapshotPairs& pairs) {
  std::vector<MatrixXd> out;
  Index col = 0;
  for (Index count : pairs.pairs_per_trajectory) {
    MatrixXd traj(count + 1, pairs.X.rows());
    traj.topRows(count) = pairs.X.middleCols(col, count).transpose();
    traj.row(count) = pairs.Xprime.col(col + count - 1).transpose();
    out.push_back(std::move(traj));
    col += count;
  }
  return out;
}

/// Diagnostic scan: non-finite entries, zero-variance state coordinates and
/// misaligned inputs. An empty result means the dataset is clean.
inline std::vector<Finding> validate_dataset(const TrajectoryDataset& data) {
  std::vector<Finding> findings;
  if (data.trajectories.empty()) {
    findings.push_back({"empty", "no trajectories"});
    return findings;
  }
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const auto& traj = data.trajectories[i];
    for (Index r = 0; r < traj.rows(); ++r)
      for (Index c = 0; c < traj.cols(); ++c)
        if (!std::isfinite(traj(r, c))) {
          findings.push_back({"non-finite", "non-finite state value",
                              static_cast<int>(i), static_cast<int>(r),
                              static_cast<int>(c)});
        }
  }

  // Variance of each coordinate pooled over all finite samples.
  const Index n = data.state_dim();
  for (Index c = 0; c < n; ++c) {
    double sum = 0.0, sum_sq = 0.0;
    Index count = 0;
    for (const auto& traj : data.trajectories) {
      if (traj.cols() != n) continue;
      for (Index r = 0; r < traj.rows(); ++r) {
        const double v = traj(r, c);
        if (!std::isfinite(v)) continue;
        sum += v;
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    for (const auto& traj : data.trajectories) {
      if (traj.cols() != n) continue;
      for (Index r = 0; r < traj.rows(); ++r) {
        const double v = traj(r, c);
        if (std::isfinite(v)) sum_sq += (v - mean) * (v - mean);
      }
    }
    if (sum_sq == 0.0)
      findings.push_back({"zero-variance", "state coordinate is constant", -1, -1,
                          static_cast<int>(c)});
  }

  for (std::size_t i = 0; i < data.trajectories.size(); ++i)
    if (data.trajectories[i].cols() != n)
      findings.push_back({"dimension-mismatch", "state dimension differs from trajectory 0",
                          static_cast<int>(i)});

  if (data.has_inputs()) {
    if (data.inputs.size() != data.trajectories.size()) {
      findings.push_back({"input-misaligned", "input count differs from trajectory count"});
    } else {
      for (std::size_t i = 0; i < data.inputs.size(); ++i) {
        if (data.inputs[i].rows() != data.trajectories[i].rows())
          findings.push_back({"input-misaligned",
                              "input rows differ from trajectory rows",
                              static_cast<int>(i)});
        for (Index r = 0; r < data.inputs[i].rows(); ++r)
          for (Index c = 0; c < data.inputs[i].cols(); ++c)
            if (!std::isfinite(data.inputs[i](r, c)))
              findings.push_back({"non-finite", "non-finite input value",
                                  static_cast<int>(i), static_cast<int>(r),
                                  static_cast<int>(c)});
      }
    }
  }
  return findings;
}

}  // namespace koopman
