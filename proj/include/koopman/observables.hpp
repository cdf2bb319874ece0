#pragma once

// Lifting maps Phi: R^n -> R^N and the state-reconstruction map C (x = C z).

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopman/error.hpp"
#include "koopman/json_matrix.hpp"
#include "koopman/kernels.hpp"
#include "koopman/linalg.hpp"
#include "koopman/types.hpp"

namespace koopman {

class ObservableLibrary;
using LibraryPtr = std::shared_ptr<const ObservableLibrary>;

/// Immutable lifting map. Subclasses implement lift_impl(); the public
/// entry points check dimensions.
///
/// Time-delay libraries lift a stacked window [x_k; x_{k-1}; ...; x_{k-d}]
/// rather than a single state, so lift() expects lift_input_dim() entries.
class ObservableLibrary {
 public:
  virtual ~ObservableLibrary() = default;

  virtual std::string kind() const = 0;
  Index n_input() const { return n_input_; }
  Index n_output() const { return n_output_; }
  virtual Index delays() const { return 0; }
  Index lift_input_dim() const { return n_input_ * (delays() + 1); }

  /// For exact-embedding libraries, the lifted index holding each state
  /// coordinate (of the most recent sample for delay libraries).
  virtual std::optional<std::vector<Index>> state_indices() const { return std::nullopt; }
  bool embeds_state() const { return state_indices().has_value(); }

  virtual json to_json() const = 0;

  VectorXd lift(const VectorXd& x) const {
    if (x.size() != lift_input_dim())
      throw Error(ErrorKind::lifting, kind() + " lift expects input of dimension " +
                                          std::to_string(lift_input_dim()) + ", got " +
                                          std::to_string(x.size()));
    VectorXd z = lift_impl(x);
    if (z.size() != n_output_)
      throw Error(ErrorKind::lifting, kind() + " produced wrong output dimension");
    return z;
  }

  /// Lifts every column of X (lift_input_dim() x m) into an N x m matrix.
  MatrixXd lift_columns(const MatrixXd& X) const {
    MatrixXd Z(n_output_, X.cols());
    for (Index j = 0; j < X.cols(); ++j) Z.col(j) = lift(X.col(j));
    return Z;
  }

  /// Lifts a trajectory stored row-per-sample. Delay libraries consume the
  /// first d samples, so T samples yield T - d lifted columns.
  MatrixXd lift_trajectory(const MatrixXd& rows) const {
    const Index d = delays();
    if (rows.cols() != n_input_)
      throw Error(ErrorKind::lifting, "trajectory state dimension does not match library");
    if (rows.rows() < d + 1)
      throw Error(ErrorKind::lifting, "trajectory too short for " + std::to_string(d) +
                                          " delays");
    MatrixXd Z(n_output_, rows.rows() - d);
    VectorXd window(lift_input_dim());
    for (Index k = d; k < rows.rows(); ++k) {
      for (Index lag = 0; lag <= d; ++lag)
        window.segment(lag * n_input_, n_input_) = rows.row(k - lag).transpose();
      Z.col(k - d) = lift(window);
    }
    return Z;
  }

 protected:
  ObservableLibrary(Index n_input, Index n_output) : n_input_(n_input), n_output_(n_output) {
    if (n_input < 1) throw Error(ErrorKind::config, "observable input dimension must be >= 1");
    if (n_output < 1) throw Error(ErrorKind::config, "observable output dimension must be >= 1");
  }

  virtual VectorXd lift_impl(const VectorXd& x) const = 0;

  static std::vector<Index> leading_state(Index n, Index offset = 0) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = offset + i;
    return idx;
  }

 private:
  Index n_input_;
  Index n_output_;
};

// ---------------------------------------------------------------------------

class IdentityLibrary final : public ObservableLibrary {
 public:
  explicit IdentityLibrary(Index n) : ObservableLibrary(n, n) {}
  std::string kind() const override { return "identity"; }
  std::optional<std::vector<Index>> state_indices() const override {
    return leading_state(n_input());
  }
  json to_json() const override { return {{"kind", kind()}, {"n_input", n_input()}}; }

 protected:
  VectorXd lift_impl(const VectorXd& x) const override { return x; }
};

/// All monomials of total degree 0..degree. Ordering: the constant first,
/// then by degree; within a degree, exponent tuples in descending
/// lexicographic order (x1^2 before x1 x2 before x2^2).
class PolynomialLibrary final : public ObservableLibrary {
 public:
  PolynomialLibrary(Index n, int degree)
      : ObservableLibrary(n, check_degree(n, degree)), degree_(degree) {
    exponents_.reserve(static_cast<std::size_t>(n_output()));
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    for (int total = 0; total <= degree; ++total) enumerate(e, 0, total);
  }

  std::string kind() const override { return "polynomial"; }
  int degree() const { return degree_; }
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

  std::optional<std::vector<Index>> state_indices() const override {
    return leading_state(n_input(), 1);
  }
  json to_json() const override {
    return {{"kind", kind()}, {"n_input", n_input()}, {"degree", degree_}};
  }

  static Index output_dim(Index n, int degree) {
    // C(n + degree, degree)
    double c = 1.0;
    for (int k = 1; k <= degree; ++k) c = c * static_cast<double>(n + k) / k;
    return static_cast<Index>(std::llround(c));
  }

 protected:
  VectorXd lift_impl(const VectorXd& x) const override {
    VectorXd z(n_output());
    for (std::size_t i = 0; i < exponents_.size(); ++i) {
      double v = 1.0;
      for (std::size_t c = 0; c < exponents_[i].size(); ++c)
        for (int p = 0; p < exponents_[i][c]; ++p) v *= x(static_cast<Index>(c));
      z(static_cast<Index>(i)) = v;
    }
    return z;
  }

 private:
  static Index check_degree(Index n, int degree) {
    if (degree < 1) throw Error(ErrorKind::config, "polynomial degree must be at least 1");
    return output_dim(n, degree);
  }

  void enumerate(std::vector<int>& e, std::size_t pos, int remaining) {
    if (pos + 1 == e.size()) {
      e[pos] = remaining;
      exponents_.push_back(e);
      return;
    }
    for (int p = remaining; p >= 0; --p) {
      e[pos] = p;
      enumerate(e, pos + 1, remaining - p);
    }
    e[pos] = 0;
  }

  int degree_;
  std::vector<std::vector<int>> exponents_;
};

/// Delay embedding [x_k; x_{k-1}; ...; x_{k-d}] with unit stride.
class TimeDelayLibrary final : public ObservableLibrary {
 public:
  TimeDelayLibrary(Index n, Index delays)
      : ObservableLibrary(n, n * (check_delays(delays) + 1)), delays_(delays) {}

  std::string kind() const override { return "time_delay"; }
  Index delays() const override { return delays_; }
  std::optional<std::vector<Index>> state_indices() const override {
    return leading_state(n_input());
  }
  json to_json() const override {
    return {{"kind", kind()}, {"n_input", n_input()}, {"delays", delays_}};
  }

  /// Lifts d+1 consecutive states given in time order (oldest row first).
  VectorXd lift_window(const MatrixXd& rows) const {
    if (rows.rows() != delays_ + 1 || rows.cols() != n_input())
      throw Error(ErrorKind::lifting, "time-delay window needs exactly " +
                                          std::to_string(delays_ + 1) + " states of dimension " +
                                          std::to_string(n_input()));
    return lift_trajectory(rows).col(0);
  }

 protected:
  VectorXd lift_impl(const VectorXd& x) const override { return x; }

 private:
  static Index check_delays(Index d) {
    if (d < 0) throw Error(ErrorKind::config, "number of delays must be nonnegative");
    return d;
  }
  Index delays_;
};

enum class RbfKind { thinplate, gauss, invquad, invmultiquad, polyharmonic };

inline std::string to_string(RbfKind k) {
  switch (k) {
    case RbfKind::thinplate: return "thinplate";
    case RbfKind::gauss: return "gauss";
    case RbfKind::invquad: return "invquad";
    case RbfKind::invmultiquad: return "invmultiquad";
    case RbfKind::polyharmonic: return "polyharmonic";
  }
  return "?";
}

inline RbfKind rbf_kind_from_string(const std::string& s) {
  if (s == "thinplate") return RbfKind::thinplate;
  if (s == "gauss") return RbfKind::gauss;
  if (s == "invquad") return RbfKind::invquad;
  if (s == "invmultiquad") return RbfKind::invmultiquad;
  if (s == "polyharmonic") return RbfKind::polyharmonic;
  throw Error(ErrorKind::config, "unknown rbf type '" + s + "'");
}

/// [x; psi(|x - c_1|); ...; psi(|x - c_k|)].
///   thinplate     r^2 ln r  (0 at r = 0)
///   gauss         exp(-(eps r)^2)
///   invquad       1 / (1 + (eps r)^2)
///   invmultiquad  1 / sqrt(1 + (eps r)^2)
///   polyharmonic  r^p ln r  (0 at r = 0)
class RbfLibrary final : public ObservableLibrary {
 public:
  RbfLibrary(RbfKind type, MatrixXd centers, double shape_eps, int polyharmonic_power = 4)
      : ObservableLibrary(centers.cols(), centers.cols() + check_centers(centers)),
        type_(type),
        centers_(std::move(centers)),
        eps_(shape_eps),
        power_(polyharmonic_power) {
    if (!(shape_eps > 0.0)) throw Error(ErrorKind::config, "rbf shape_eps must be positive");
  }

  std::string kind() const override { return "rbf"; }
  const MatrixXd& centers() const { return centers_; }
  RbfKind type() const { return type_; }

  std::optional<std::vector<Index>> state_indices() const override {
    return leading_state(n_input());
  }
  json to_json() const override {
    return {{"kind", kind()},          {"n_input", n_input()},
            {"rbf_type", to_string(type_)}, {"centers", matrix_to_json(centers_)},
            {"shape_eps", eps_},       {"polyharmonic_power", power_}};
  }

  double basis(double r) const {
    switch (type_) {
      case RbfKind::thinplate: return r == 0.0 ? 0.0 : r * r * std::log(r);
      case RbfKind::gauss: return std::exp(-(eps_ * r) * (eps_ * r));
      case RbfKind::invquad: return 1.0 / (1.0 + (eps_ * r) * (eps_ * r));
      case RbfKind::invmultiquad: return 1.0 / std::sqrt(1.0 + (eps_ * r) * (eps_ * r));
      case RbfKind::polyharmonic: return r == 0.0 ? 0.0 : std::pow(r, power_) * std::log(r);
    }
    return 0.0;
  }

 protected:
  VectorXd lift_impl(const VectorXd& x) const override {
    VectorXd z(n_output());
    z.head(n_input()) = x;
    for (Index k = 0; k < centers_.rows(); ++k)
      z(n_input() + k) = basis((x.transpose() - centers_.row(k)).norm());
    return z;
  }

 private:
  static Index check_centers(const MatrixXd& c) {
    if (c.rows() < 1) throw Error(ErrorKind::config, "rbf needs at least one center");
    return c.rows();
  }

  RbfKind type_;
  MatrixXd centers_;  // k x n, one center per row
  double eps_;
  int power_;
};

/// Random Fourier features sqrt(2/D) cos(w_i^T x + b_i), w_i ~ N(0, sigma^-2 I),
/// b_i ~ U[0, 2 pi). Weights are drawn once from `seed` and stored.
class RandomFourierLibrary final : public ObservableLibrary {
 public:
  RandomFourierLibrary(Index n, Index n_features, double sigma, std::uint64_t seed,
                       bool include_state)
      : ObservableLibrary(n, check(n_features, sigma) + (include_state ? n : 0)),
        sigma_(sigma),
        seed_(seed),
        include_state_(include_state),
        weights_(n_features, n),
        offsets_(n_features) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
    for (Index i = 0; i < n_features; ++i) {
      for (Index c = 0; c < n; ++c) weights_(i, c) = normal(rng) / sigma;
      offsets_(i) = uniform(rng);
    }
  }

  /// Restores a library with explicit weights (deserialization).
  RandomFourierLibrary(MatrixXd weights, VectorXd offsets, double sigma, std::uint64_t seed,
                       bool include_state)
      : ObservableLibrary(weights.cols(),
                          check(weights.rows(), sigma) + (include_state ? weights.cols() : 0)),
        sigma_(sigma),
        seed_(seed),
        include_state_(include_state),
        weights_(std::move(weights)),
        offsets_(std::move(offsets)) {
    if (offsets_.size() != weights_.rows())
      throw Error(ErrorKind::config, "random fourier offsets do not match weights");
  }

  std::string kind() const override { return "random_fourier"; }
  Index n_features() const { return weights_.rows(); }
  const MatrixXd& weights() const { return weights_; }
  const VectorXd& offsets() const { return offsets_; }

  std::optional<std::vector<Index>> state_indices() const override {
    if (!include_state_) return std::nullopt;
    return leading_state(n_input());
  }
  json to_json() const override {
    return {{"kind", kind()},
            {"n_input", n_input()},
            {"n_features", n_features()},
            {"sigma", sigma_},
            {"seed", seed_},
            {"include_state", include_state_},
            {"weights", matrix_to_json(weights_)},
            {"offsets", matrix_to_json(MatrixXd(offsets_))}};
  }

 protected:
  VectorXd lift_impl(const VectorXd& x) const override {
    VectorXd z(n_output());
    const Index off = include_state_ ? n_input() : 0;
    if (include_state_) z.head(off) = x;
    const double scale = std::sqrt(2.0 / static_cast<double>(n_features()));
    z.tail(n_features()) = scale * ((weights_ * x + offsets_).array().cos()).matrix();
    return z;
  }

 private:
  static Index check(Index n_features, double sigma) {
    if (n_features < 1) throw Error(ErrorKind::config, "n_features must be at least 1");
    if (!(sigma > 0.0)) throw Error(ErrorKind::config, "random fourier sigma must be positive");
    return n_features;
  }

  double sigma_;
  std::uint64_t seed_;
  bool include_state_;
  MatrixXd weights_;  // D x n
  VectorXd offsets_;  // D
};

// ---------------------------------------------------------------------------
// Custom observables.

/// A named, user-supplied observable. The name is what gets serialized, so
/// a model using custom functions can only be reloaded where the same name
/// resolves (see register_custom_function / builtin names below).
struct CustomFunction {
  std::string name;
  Index output_dim = 1;
  std::function<VectorXd(const VectorXd&)> fn;
};

namespace detail {

inline std::map<std::string, CustomFunction>& custom_registry() {
  static std::map<std::string, CustomFunction> registry;
  return registry;
}

inline std::mutex& custom_registry_mutex() {
  static std::mutex m;
  return m;
}

inline std::optional<double (*)(double)> builtin_scalar(const std::string& fn) {
  if (fn == "sin") return +[](double v) { return std::sin(v); };
  if (fn == "cos") return +[](double v) { return std::cos(v); };
  if (fn == "exp") return +[](double v) { return std::exp(v); };
  if (fn == "tanh") return +[](double v) { return std::tanh(v); };
  if (fn == "square") return +[](double v) { return v * v; };
  if (fn == "cube") return +[](double v) { return v * v * v; };
  return std::nullopt;
}

}  // namespace detail

inline void register_custom_function(CustomFunction f) {
  std::lock_guard lock(detail::custom_registry_mutex());
  detail::custom_registry()[f.name] = std::move(f);
}

/// Resolves a custom function by name. Registered names win; otherwise the
/// builtin forms are
///   "<fn>"          elementwise over the whole state (n outputs)
///   "<fn>:<i>"      applied to coordinate i (0-based, one output)
///   "prod:<i>,<j>"  x_i * x_j
/// with fn in {sin, cos, exp, tanh, square, cube}.
inline CustomFunction resolve_custom_function(const std::string& name, Index n) {
  {
    std::lock_guard lock(detail::custom_registry_mutex());
    auto it = detail::custom_registry().find(name);
    if (it != detail::custom_registry().end()) return it->second;
  }
  const auto colon = name.find(':');
  const std::string head = name.substr(0, colon);
  auto parse_index = [&](const std::string& s) {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || v < 0 || v >= n)
      throw Error(ErrorKind::config, "bad coordinate index in custom function '" + name + "'");
    return static_cast<Index>(v);
  };
  if (head == "prod" && colon != std::string::npos) {
    const std::string rest = name.substr(colon + 1);
    const auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorKind::config, "prod needs two indices: '" + name + "'");
    const Index i = parse_index(rest.substr(0, comma));
    const Index j = parse_index(rest.substr(comma + 1));
    return {name, 1, [i, j](const VectorXd& x) { return VectorXd::Constant(1, x(i) * x(j)); }};
  }
  const auto scalar = detail::builtin_scalar(head);
  if (!scalar) throw Error(ErrorKind::config, "unknown custom function '" + name + "'");
  const auto f = *scalar;
  if (colon == std::string::npos)
    return {name, n, [f](const VectorXd& x) { return VectorXd(x.unaryExpr(f)); }};
  const Index i = parse_index(name.substr(colon + 1));
  return {name, 1, [f, i](const VectorXd& x) { return VectorXd::Constant(1, f(x(i))); }};
}

/// [x; f_1(x); f_2(x); ...].
class CustomLibrary final : public ObservableLibrary {
 public:
  CustomLibrary(Index n, std::vector<CustomFunction> functions)
      : ObservableLibrary(n, n + total_dim(functions)), functions_(std::move(functions)) {}

  std::string kind() const override { return "custom"; }
  std::optional<std::vector<Index>> state_indices() const override {
    return leading_state(n_input());
  }
  json to_json() const override {
    json names = json::array();
    for (const auto& f : functions_) names.push_back(f.name);
    return {{"kind", kind()}, {"n_input", n_input()}, {"functions", names}};
  }

 protected:
  VectorXd lift_impl(const VectorXd& x) const override {
    VectorXd z(n_output());
    z.head(n_input()) = x;
    Index pos = n_input();
    for (std::size_t i = 0; i < functions_.size(); ++i) {
      const VectorXd v = functions_[i].fn(x);
      if (v.size() != functions_[i].output_dim)
        throw Error(ErrorKind::lifting, "custom function " + std::to_string(i) +
                                            " returned wrong dimension");
      if (!v.allFinite())
        throw Error(ErrorKind::lifting, "custom function " + std::to_string(i) +
                                            " returned non-finite value");
      z.segment(pos, v.size()) = v;
      pos += v.size();
    }
    return z;
  }

 private:
  static Index total_dim(const std::vector<CustomFunction>& fs) {
    Index total = 0;
    for (const auto& f : fs) {
      if (f.output_dim < 1 || !f.fn)
        throw Error(ErrorKind::config, "custom function '" + f.name + "' is invalid");
      total += f.output_dim;
    }
    return total;
  }

  std::vector<CustomFunction> functions_;
};

/// Concatenation of libraries. Once one part embeds the state, the state
/// coordinates of later embedding parts are dropped so the state appears once.
class ConcatLibrary final : public ObservableLibrary {
 public:
  explicit ConcatLibrary(std::vector<LibraryPtr> parts)
      : ObservableLibrary(check_parts(parts), kept_dim(parts)), parts_(std::move(parts)) {
    bool have_state = false;
    Index offset = 0;
    for (const auto& p : parts_) {
      std::vector<Index> keep;
      std::set<Index> drop;
      const auto idx = p->state_indices();
      if (idx && have_state) drop.insert(idx->begin(), idx->end());
      for (Index i = 0; i < p->n_output(); ++i)
        if (!drop.count(i)) keep.push_back(i);
      if (idx && !have_state) {
        have_state = true;
        std::vector<Index> mapped;
        for (Index i : *idx) {
          const auto pos = std::find(keep.begin(), keep.end(), i) - keep.begin();
          mapped.push_back(offset + pos);
        }
        state_idx_ = mapped;
      }
      offset += static_cast<Index>(keep.size());
      kept_.push_back(std::move(keep));
    }
  }

  std::string kind() const override { return "concat"; }
  const std::vector<LibraryPtr>& parts() const { return parts_; }
  std::optional<std::vector<Index>> state_indices() const override { return state_idx_; }

  json to_json() const override {
    json libs = json::array();
    for (const auto& p : parts_) libs.push_back(p->to_json());
    return {{"kind", kind()}, {"n_input", n_input()}, {"libraries", libs}};
  }

 protected:
  VectorXd lift_impl(const VectorXd& x) const override {
    VectorXd z(n_output());
    Index pos = 0;
    for (std::size_t p = 0; p < parts_.size(); ++p) {
      const VectorXd part = parts_[p]->lift(x);
      for (Index i : kept_[p]) z(pos++) = part(i);
    }
    return z;
  }

 private:
  static Index check_parts(const std::vector<LibraryPtr>& parts) {
    if (parts.empty()) throw Error(ErrorKind::config, "concat needs at least one library");
    const Index n = parts.front()->n_input();
    for (const auto& p : parts) {
      if (!p) throw Error(ErrorKind::config, "concat part is null");
      if (p->n_input() != n)
        throw Error(ErrorKind::config, "concat libraries have mismatched n_input");
      if (p->delays() != 0)
        throw Error(ErrorKind::config, "time-delay libraries cannot be concatenated");
    }
    return n;
  }

  static Index kept_dim(const std::vector<LibraryPtr>& parts) {
    Index total = 0;
    bool have_state = false;
    for (const auto& p : parts) {
      total += p->n_output();
      if (p->embeds_state()) {
        if (have_state) total -= p->n_input();
        have_state = true;
      }
    }
    return total;
  }

  std::vector<LibraryPtr> parts_;
  std::vector<std::vector<Index>> kept_;
  std::optional<std::vector<Index>> state_idx_;
};

/// Projected kernel features z(x) = P [k(x, x_1), ..., k(x, x_m)]^T used by
/// kernel DMD. Built by the regression, not by users.
class KernelFeatureLibrary final : public ObservableLibrary {
 public:
  KernelFeatureLibrary(KernelConfig kernel, MatrixXd training, MatrixXd projection)
      : ObservableLibrary(training.rows(), projection.rows()),
        kernel_(kernel),
        training_(std::move(training)),
        projection_(std::move(projection)) {
    if (projection_.cols() != training_.cols())
      throw Error(ErrorKind::config, "kernel projection does not match training set");
  }

  std::string kind() const override { return "kernel_features"; }
  const KernelConfig& kernel() const { return kernel_; }
  const MatrixXd& training() const { return training_; }
  const MatrixXd& projection() const { return projection_; }

  json to_json() const override {
    return {{"kind", kind()},
            {"n_input", n_input()},
            {"kernel", kernel_to_json(kernel_)},
            {"training", matrix_to_json(training_)},
            {"projection", matrix_to_json(projection_)}};
  }

 protected:
  VectorXd lift_impl(const VectorXd& x) const override {
    VectorXd k(training_.cols());
    for (Index i = 0; i < training_.cols(); ++i) k(i) = kernel_(x, training_.col(i));
    return projection_ * k;
  }

 private:
  KernelConfig kernel_;
  MatrixXd training_;    // n x m, training states as columns
  MatrixXd projection_;  // r x m
};

// ---------------------------------------------------------------------------
// Factories.

inline LibraryPtr make_identity(Index n) { return std::make_shared<IdentityLibrary>(n); }
inline LibraryPtr make_polynomial(Index n, int degree) {
  return std::make_shared<PolynomialLibrary>(n, degree);
}
inline LibraryPtr make_time_delay(Index n, Index delays) {
  return std::make_shared<TimeDelayLibrary>(n, delays);
}
inline LibraryPtr make_rbf(RbfKind type, MatrixXd centers, double shape_eps,
                           int polyharmonic_power = 4) {
  return std::make_shared<RbfLibrary>(type, std::move(centers), shape_eps, polyharmonic_power);
}
inline LibraryPtr make_random_fourier(Index n, Index n_features, double sigma,
                                      std::uint64_t seed, bool include_state) {
  return std::make_shared<RandomFourierLibrary>(n, n_features, sigma, seed, include_state);
}
inline LibraryPtr make_custom(Index n, std::vector<CustomFunction> functions) {
  return std::make_shared<CustomLibrary>(n, std::move(functions));
}
inline LibraryPtr make_concat(std::vector<LibraryPtr> parts) {
  return std::make_shared<ConcatLibrary>(std::move(parts));
}

/// Uniform draw of k distinct rows of `states` (rows = samples) with a fixed seed.
inline MatrixXd sample_centers(const MatrixXd& states, Index k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorKind::config, "n_centers must be at least 1");
  if (states.rows() < k)
    throw Error(ErrorKind::config, "not enough training samples to draw rbf centers");
  std::vector<Index> idx(static_cast<std::size_t>(states.rows()));
  for (Index i = 0; i < states.rows(); ++i) idx[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  MatrixXd centers(k, states.cols());
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, states.rows() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    centers.row(i) = states.row(idx[static_cast<std::size_t>(i)]);
  }
  return centers;
}

namespace detail {

inline void check_keys(const json& cfg, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : cfg.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok)
      throw Error(ErrorKind::config, "unknown key '" + key + "' for observables kind '" +
                                         cfg.value("kind", std::string("?")) + "'");
  }
}

}  // namespace detail

/// Builds a library from its JSON config. `n_input` fills in a missing
/// "n_input" key; `training_states` (rows = samples) is only needed when an
/// rbf config asks for sampled centers ("n_centers" instead of "centers").
inline LibraryPtr library_from_json(const json& cfg, std::optional<Index> n_input = std::nullopt,
                                    const MatrixXd* training_states = nullptr) {
  if (!cfg.is_object() || !cfg.contains("kind"))
    throw Error(ErrorKind::config, "observables config must be an object with a 'kind'");
  const std::string kind = cfg.at("kind").get<std::string>();
  Index n = 0;
  if (cfg.contains("n_input")) {
    n = cfg.at("n_input").get<Index>();
    if (n_input && *n_input != n)
      throw Error(ErrorKind::config, "observables n_input does not match the data");
  } else if (n_input) {
    n = *n_input;
  } else {
    throw Error(ErrorKind::config, "observables config needs 'n_input'");
  }

  if (kind == "identity") {
    detail::check_keys(cfg, {"kind", "n_input"});
    return make_identity(n);
  }
  if (kind == "polynomial") {
    detail::check_keys(cfg, {"kind", "n_input", "degree"});
    return make_polynomial(n, cfg.value("degree", 2));
  }
  if (kind == "time_delay") {
    detail::check_keys(cfg, {"kind", "n_input", "delays"});
    return make_time_delay(n, cfg.value("delays", Index{1}));
  }
  if (kind == "rbf") {
    detail::check_keys(cfg, {"kind", "n_input", "rbf_type", "centers", "n_centers", "seed",
                             "shape_eps", "polyharmonic_power"});
    MatrixXd centers;
    if (cfg.contains("centers")) {
      centers = matrix_from_json(cfg.at("centers"));
    } else {
      if (!training_states)
        throw Error(ErrorKind::config, "rbf config needs 'centers' or training data");
      centers = sample_centers(*training_states, cfg.value("n_centers", Index{10}),
                               cfg.value("seed", std::uint64_t{0}));
    }
    if (centers.cols() != n)
      throw Error(ErrorKind::config, "rbf center dimension does not match n_input");
    return make_rbf(rbf_kind_from_string(cfg.value("rbf_type", std::string("thinplate"))),
                    std::move(centers), cfg.value("shape_eps", 1.0),
                    cfg.value("polyharmonic_power", 4));
  }
  if (kind == "random_fourier") {
    detail::check_keys(cfg, {"kind", "n_input", "n_features", "sigma", "seed", "include_state",
                             "weights", "offsets"});
    const double sigma = cfg.value("sigma", 1.0);
    const auto seed = cfg.value("seed", std::uint64_t{0});
    const bool include_state = cfg.value("include_state", true);
    if (cfg.contains("weights")) {
      MatrixXd w = matrix_from_json(cfg.at("weights"));
      MatrixXd b = matrix_from_json(cfg.at("offsets"));
      if (w.cols() != n) throw Error(ErrorKind::config, "random fourier weights shape");
      return std::make_shared<RandomFourierLibrary>(std::move(w), VectorXd(b.col(0)), sigma,
                                                    seed, include_state);
    }
    return make_random_fourier(n, cfg.value("n_features", Index{100}), sigma, seed,
                               include_state);
  }
  if (kind == "custom") {
    detail::check_keys(cfg, {"kind", "n_input", "functions"});
    std::vector<CustomFunction> fs;
    for (const auto& name : cfg.value("functions", json::array()))
      fs.push_back(resolve_custom_function(name.get<std::string>(), n));
    return make_custom(n, std::move(fs));
  }
  if (kind == "concat") {
    detail::check_keys(cfg, {"kind", "n_input", "libraries"});
    std::vector<LibraryPtr> parts;
    for (const auto& part : cfg.value("libraries", json::array()))
      parts.push_back(library_from_json(part, n, training_states));
    return make_concat(std::move(parts));
  }
  if (kind == "kernel_features") {
    detail::check_keys(cfg, {"kind", "n_input", "kernel", "training", "projection"});
    return std::make_shared<KernelFeatureLibrary>(kernel_from_json(cfg.at("kernel")),
                                                  matrix_from_json(cfg.at("training")),
                                                  matrix_from_json(cfg.at("projection")));
  }
  throw Error(ErrorKind::config, "unknown observables kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Reconstruction x = C z.

struct ReconstructionMap {
  MatrixXd C;  // n x N
  bool exact = false;
};

struct ReconstructionFit {
  ReconstructionMap map;
  std::vector<Finding> findings;
};

/// Index selection for exact-embedding libraries; otherwise
/// C = argmin |X - C Phi(X)|_F via a cutoff pseudoinverse (minimum-norm when
/// Phi(X) is rank deficient, reported as a warning finding).
inline ReconstructionFit fit_reconstruction(const ObservableLibrary& library, const MatrixXd& X,
                                            double cutoff = kDefaultSvdCutoff) {
  ReconstructionFit out;
  const Index n = library.n_input();
  if (const auto idx = library.state_indices()) {
    out.map.C = MatrixXd::Zero(n, library.n_output());
    for (Index i = 0; i < n; ++i) out.map.C(i, (*idx)[static_cast<std::size_t>(i)]) = 1.0;
    out.map.exact = true;
    return out;
  }
  if (library.delays() != 0)
    throw Error(ErrorKind::reconstruction, "fitted reconstruction needs a delay-free library");
  if (X.rows() != n) throw Error(ErrorKind::reconstruction, "training matrix has wrong rows");
  const MatrixXd Z = library.lift_columns(X);
  bool deficient = false;
  out.map.C = solve_right_pinv(X, Z, cutoff, &deficient);
  if (deficient || X.cols() < library.n_output())
    out.findings.push_back({"rank-deficient",
                            "lifted training data is rank deficient; minimum-norm "
                            "reconstruction returned"});
  return out;
}

}  // namespace koopman
