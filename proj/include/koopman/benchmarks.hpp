#pragma once

// Reference dynamical systems and a fixed-step RK4 integrator for generating
// ground-truth trajectories.

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopman/error.hpp"
#include "koopman/types.hpp"

namespace koopman::bench {

using Params = std::map<std::string, double>;

/// A continuous-time system x' = rhs(x, u, t; params).
struct SystemSpec {
  std::string name;
  Index n = 0;
  Index q = 0;
  Params params;
  std::function<VectorXd(const VectorXd&, const VectorXd&, double, const Params&)> rhs;

  VectorXd operator()(const VectorXd& x, const VectorXd& u, double t) const {
    return rhs(x, u, t, params);
  }
};

namespace detail {

inline double param(const Params& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw Error(ErrorKind::config, "missing parameter '" + key + "'");
  return it->second;
}

inline double input(const VectorXd& u, Index i) { return i < u.size() ? u(i) : 0.0; }

}  // namespace detail

/// Catalog entry with default parameters. Known names: slow_manifold,
/// vdp_osc, lorenz, forced_duffing.
///
///   slow_manifold   (mu x1, lambda (x2 - x1^2)), mu = -0.05, lambda = -1
///   vdp_osc         (x2, mu (1 - x1^2) x2 - x1 + u), mu = 2
///   lorenz          (sigma (x2 - x1), x1 (rho - x3) - x2, x1 x2 - beta x3)
///   forced_duffing  (x2, -delta x2 - alpha x1 - beta x1^3 + u)
inline SystemSpec system(const std::string& name) {
  using detail::input;
  using detail::param;
  if (name == "slow_manifold") {
    return {name, 2, 0, {{"mu", -0.05}, {"lambda", -1.0}},
            [](const VectorXd& x, const VectorXd&, double, const Params& p) {
              const double mu = param(p, "mu"), lam = param(p, "lambda");
              VectorXd dx(2);
              dx << mu * x(0), lam * (x(1) - x(0) * x(0));
              return dx;
            }};
  }
  if (name == "vdp_osc") {
    return {name, 2, 1, {{"mu", 2.0}},
            [](const VectorXd& x, const VectorXd& u, double, const Params& p) {
              const double mu = param(p, "mu");
              VectorXd dx(2);
              dx << x(1), mu * (1.0 - x(0) * x(0)) * x(1) - x(0) + input(u, 0);
              return dx;
            }};
  }
  if (name == "lorenz") {
    return {name, 3, 0, {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}},
            [](const VectorXd& x, const VectorXd&, double, const Params& p) {
              const double s = param(p, "sigma"), r = param(p, "rho"), b = param(p, "beta");
              VectorXd dx(3);
              dx << s * (x(1) - x(0)), x(0) * (r - x(2)) - x(1), x(0) * x(1) - b * x(2);
              return dx;
            }};
  }
  if (name == "forced_duffing") {
    return {name, 2, 1, {{"delta", 0.5}, {"alpha", -1.0}, {"beta", 1.0}},
            [](const VectorXd& x, const VectorXd& u, double, const Params& p) {
              const double d = param(p, "delta"), a = param(p, "alpha"), b = param(p, "beta");
              VectorXd dx(2);
              dx << x(1), -d * x(1) - a * x(0) - b * x(0) * x(0) * x(0) + input(u, 0);
              return dx;
            }};
  }
  throw Error(ErrorKind::config, "unknown system '" + name + "'");
}

inline std::vector<std::string> catalog() {
  return {"slow_manifold", "vdp_osc", "lorenz", "forced_duffing"};
}

/// Dispatches to the catalog right-hand side; `params` overrides defaults.
inline VectorXd system_rhs(const std::string& name, const VectorXd& x, const VectorXd& u,
                           double t, const Params& params = {}) {
  SystemSpec spec = system(name);
  for (const auto& [k, v] : params) {
    if (!spec.params.count(k))
      throw Error(ErrorKind::config, "unknown parameter '" + k + "' for system " + name);
    spec.params[k] = v;
  }
  if (x.size() != spec.n) throw Error(ErrorKind::data, "state dimension mismatch for " + name);
  return spec(x, u, t);
}

/// Classical fixed-step RK4; inputs are held constant over each step.
/// `inputs` (n_steps x q, may be empty) gives u_k for step k. Returns
/// (n_steps + 1) x n, first row x0.
inline MatrixXd integrate_rk4(const SystemSpec& spec, const VectorXd& x0, double dt,
                              Index n_steps, const MatrixXd& inputs = MatrixXd()) {
  if (!(dt > 0.0)) throw Error(ErrorKind::config, "dt must be positive");
  if (n_steps < 0) throw Error(ErrorKind::config, "n_steps must be nonnegative");
  if (x0.size() != spec.n) throw Error(ErrorKind::data, "initial state has wrong dimension");
  if (inputs.size() != 0 && inputs.rows() < n_steps)
    throw Error(ErrorKind::data, "input signal shorter than the number of steps");
  MatrixXd out(n_steps + 1, spec.n);
  out.row(0) = x0.transpose();
  VectorXd x = x0;
  VectorXd u = VectorXd::Zero(spec.q);
  for (Index k = 0; k < n_steps; ++k) {
    if (inputs.size() != 0) u = inputs.row(k).transpose();
    const double t = static_cast<double>(k) * dt;
    const VectorXd k1 = spec(x, u, t);
    const VectorXd k2 = spec(x + 0.5 * dt * k1, u, t + 0.5 * dt);
    const VectorXd k3 = spec(x + 0.5 * dt * k2, u, t + 0.5 * dt);
    const VectorXd k4 = spec(x + dt * k3, u, t + dt);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw Error(ErrorKind::data, "non-finite state at step " + std::to_string(k + 1));
    out.row(k + 1) = x.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete-time generators.

struct StateSpace {
  MatrixXd A;
  MatrixXd B;
};

/// Random stable discrete-time system. A is block diagonal in real and
/// complex-conjugate eigenvalue blocks with moduli uniform on (0.1, rho_max),
/// conjugated by a random orthogonal matrix; B is standard Gaussian.
inline StateSpace drss(Index n, Index q, std::uint64_t seed, double rho_max = 0.9) {
  if (n < 1) throw Error(ErrorKind::config, "drss needs n >= 1");
  if (q < 0) throw Error(ErrorKind::config, "drss needs q >= 0");
  if (!(rho_max > 0.1 && rho_max < 1.0))
    throw Error(ErrorKind::config, "rho_max must lie in (0.1, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> modulus(0.1, rho_max);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  MatrixXd D = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n;) {
    const double rho = modulus(rng);
    if (i + 1 < n && coin(rng) < 0.5) {
      const double th = angle(rng);
      D(i, i) = rho * std::cos(th);
      D(i, i + 1) = -rho * std::sin(th);
      D(i + 1, i) = rho * std::sin(th);
      D(i + 1, i + 1) = rho * std::cos(th);
      i += 2;
    } else {
      D(i, i) = coin(rng) < 0.5 ? -rho : rho;
      i += 1;
    }
  }
  MatrixXd G(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) G(r, c) = normal(rng);
  Eigen::HouseholderQR<MatrixXd> qr(G);
  MatrixXd Q = qr.householderQ();
  const MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index c = 0; c < n; ++c)
    if (R(c, c) < 0.0) Q.col(c) = -Q.col(c);

  StateSpace ss;
  ss.A = Q * D * Q.transpose();
  ss.B.resize(n, q);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < q; ++c) ss.B(r, c) = normal(rng);
  return ss;
}

/// Fixed stable map [[0.8, -0.1], [0, 0.7]].
inline Eigen::Matrix2d linear2d_matrix() {
  Eigen::Matrix2d A;
  A << 0.8, -0.1, 0.0, 0.7;
  return A;
}

inline VectorXd linear2d_step(const VectorXd& x) {
  if (x.size() != 2) throw Error(ErrorKind::data, "linear2d state must be 2-dimensional");
  return linear2d_matrix() * x;
}

/// Iterates x_{k+1} = A x_k (+ B u_k); returns (n_steps + 1) x n.
inline MatrixXd iterate_linear(const MatrixXd& A, const VectorXd& x0, Index n_steps,
                               const MatrixXd& B = MatrixXd(),
                               const MatrixXd& inputs = MatrixXd()) {
  MatrixXd out(n_steps + 1, x0.size());
  out.row(0) = x0.transpose();
  VectorXd x = x0;
  for (Index k = 0; k < n_steps; ++k) {
    VectorXd next = A * x;
    if (B.size() != 0) next += B * inputs.row(k).transpose();
    x = next;
    out.row(k + 1) = x.transpose();
  }
  return out;
}

inline VectorXd default_torus_freqs() {
  VectorXd f(2);
  f << std::sqrt(2.0) / 5.0, std::sqrt(3.0) / 5.0;
  return f;
}

inline VectorXd default_torus_amps() {
  VectorXd a(2);
  a << 1.0, 0.5;
  return a;
}

/// sum_i a_i exp(i 2 pi f_i t) sampled at t, as columns (Re, Im).
inline MatrixXd torus_signal(const VectorXd& t, const VectorXd& freqs = default_torus_freqs(),
                             const VectorXd& amps = default_torus_amps()) {
  if (freqs.size() == 0) throw Error(ErrorKind::config, "torus needs at least one frequency");
  if (amps.size() != freqs.size())
    throw Error(ErrorKind::config, "torus amplitudes must match frequencies");
  MatrixXd out = MatrixXd::Zero(t.size(), 2);
  for (Index k = 0; k < t.size(); ++k)
    for (Index i = 0; i < freqs.size(); ++i) {
      const double ph = 2.0 * std::numbers::pi * freqs(i) * t(k);
      out(k, 0) += amps(i) * std::cos(ph);
      out(k, 1) += amps(i) * std::sin(ph);
    }
  return out;
}

/// Trajectories of the slow-manifold system from a uniform grid of initial
/// conditions on [-1, 1]^2 (grid x grid points), `samples` rows each.
inline TrajectoryDataset slow_manifold_grid(Index grid, Index samples, double dt = 0.02) {
  const SystemSpec spec = system("slow_manifold");
  TrajectoryDataset data;
  data.dt = dt;
  const VectorXd axis = VectorXd::LinSpaced(grid, -1.0, 1.0);
  for (Index a = 0; a < grid; ++a)
    for (Index b = 0; b < grid; ++b) {
      VectorXd x0(2);
      x0 << axis(a), axis(b);
      data.trajectories.push_back(integrate_rk4(spec, x0, dt, samples - 1));
    }
  return data;
}

}  // namespace koopman::bench
