#pragma once

// The fitted Koopman model: observables + regression + reconstruction, and
// everything computed from it (prediction, simulation, spectral analytics).

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopman/error.hpp"
#include "koopman/json_matrix.hpp"
#include "koopman/kernels.hpp"
#include "koopman/observables.hpp"
#include "koopman/regression.hpp"
#include "koopman/types.hpp"

namespace koopman {

inline constexpr int kModelSchemaVersion = 1;

enum class RegressorKind { dmd, edmd, dmdc, edmdc, kdmd, hdmd, hdmdc };

inline std::string to_string(RegressorKind k) {
  switch (k) {
    case RegressorKind::dmd: return "dmd";
    case RegressorKind::edmd: return "edmd";
    case RegressorKind::dmdc: return "dmdc";
    case RegressorKind::edmdc: return "edmdc";
    case RegressorKind::kdmd: return "kdmd";
    case RegressorKind::hdmd: return "hdmd";
    case RegressorKind::hdmdc: return "hdmdc";
  }
  return "?";
}

inline RegressorKind regressor_kind_from_string(const std::string& s) {
  for (auto k : {RegressorKind::dmd, RegressorKind::edmd, RegressorKind::dmdc,
                 RegressorKind::edmdc, RegressorKind::kdmd, RegressorKind::hdmd,
                 RegressorKind::hdmdc})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::config, "unknown regressor kind '" + s + "'");
}

inline bool is_controlled(RegressorKind k) {
  return k == RegressorKind::dmdc || k == RegressorKind::edmdc || k == RegressorKind::hdmdc;
}

struct RegressorConfig {
  RegressorKind kind = RegressorKind::edmd;
  RankSpec rank;
  std::optional<Index> rank_out;
  Index delays = 1;  // hdmd / hdmdc
  KernelConfig kernel;
  /// Report projected modes (U_r w) instead of exact-DMD modes.
  bool projected_modes = false;
};

inline json regressor_to_json(const RegressorConfig& c) {
  json j = {{"kind", to_string(c.kind)}, {"cutoff", c.rank.cutoff}};
  if (c.rank.rank) j["rank"] = *c.rank.rank;
  if (c.rank_out) j["rank_out"] = *c.rank_out;
  if (c.kind == RegressorKind::hdmd || c.kind == RegressorKind::hdmdc) j["delays"] = c.delays;
  if (c.kind == RegressorKind::kdmd) j["kernel"] = kernel_to_json(c.kernel);
  if (c.projected_modes) j["projected_modes"] = true;
  return j;
}

inline RegressorConfig regressor_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw Error(ErrorKind::config, "regressor config must be an object with a 'kind'");
  for (const auto& [key, _] : j.items())
    if (key != "kind" && key != "rank" && key != "cutoff" && key != "rank_out" &&
        key != "delays" && key != "kernel" && key != "projected_modes")
      throw Error(ErrorKind::config, "unknown regressor key '" + key + "'");
  RegressorConfig c;
  c.kind = regressor_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("rank")) c.rank.rank = j.at("rank").get<Index>();
  c.rank.cutoff = j.value("cutoff", c.rank.cutoff);
  if (j.contains("rank_out")) c.rank_out = j.at("rank_out").get<Index>();
  c.delays = j.value("delays", c.delays);
  if (j.contains("kernel")) c.kernel = kernel_from_json(j.at("kernel"));
  c.projected_modes = j.value("projected_modes", false);
  if (!(c.rank.cutoff >= 0.0)) throw Error(ErrorKind::config, "cutoff must be nonnegative");
  if (c.delays < 0) throw Error(ErrorKind::config, "delays must be nonnegative");
  return c;
}

/// Fit statistics and training-time analytics.
struct ModelMetadata {
  std::string method;
  Index m = 0;
  Index rank = 0;
  double residual = 0.0;
  double sigma_min = 0.0;
  /// First lifted training snapshot; the reference point for mode amplitudes.
  VectorXd z0;
  /// Linearity-consistency score of each eigenfunction on the training pairs.
  VectorXd linearity_scores;
  bool projected_modes = false;
  std::vector<Finding> findings;

  /// Upper bound residual / sigma_min on every training linearity score.
  double score_bound() const {
    return sigma_min > 0.0 ? residual / sigma_min : std::numeric_limits<double>::infinity();
  }
};

/// Immutable fitted model. predict(x) = C (A Phi(x) + B u).
class KoopmanModel {
 public:
  KoopmanModel(LibraryPtr observables, RegressionResult regression, ReconstructionMap C,
               double dt, RegressorConfig regressor, ModelMetadata metadata)
      : observables_(std::move(observables)),
        regression_(std::move(regression)),
        C_(std::move(C)),
        dt_(dt),
        regressor_(std::move(regressor)),
        metadata_(std::move(metadata)) {}

  const ObservableLibrary& observables() const { return *observables_; }
  const LibraryPtr& observables_ptr() const { return observables_; }
  const RegressionResult& regression() const { return regression_; }
  const MatrixXd& A() const { return regression_.A; }
  const std::optional<MatrixXd>& B() const { return regression_.B; }
  const MatrixXd& C() const { return C_.C; }
  const ReconstructionMap& reconstruction() const { return C_; }
  const EigenSystem& eigen() const { return regression_.eigen; }
  const RegressorConfig& regressor() const { return regressor_; }
  const ModelMetadata& metadata() const { return metadata_; }
  double dt() const { return dt_; }
  Index n() const { return observables_->n_input(); }
  Index q() const { return regression_.B ? regression_.B->cols() : 0; }
  Index delays() const { return observables_->delays(); }
  bool controlled() const { return regression_.B.has_value(); }

  /// Mode vectors in lifted coordinates (exact or projected per config).
  const MatrixXcd& lifted_modes() const {
    return metadata_.projected_modes ? regression_.eigen.W_right : regression_.exact_modes;
  }

 private:
  LibraryPtr observables_;
  RegressionResult regression_;
  ReconstructionMap C_;
  double dt_;
  RegressorConfig regressor_;
  ModelMetadata metadata_;
};

namespace pipeline_detail {

/// Runs `fn`, relabeling any koopman::Error with the workflow stage.
template <typename Fn>
auto staged(const char* stage, ErrorKind kind, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    const ErrorKind k = e.kind() == ErrorKind::config || e.kind() == ErrorKind::data
                            ? e.kind()
                            : kind;
    throw Error(k, std::string(stage) + ": " + e.what());
  }
}

inline VectorXd score_pairs(const EigenSystem& es, const MatrixXd& Z, const MatrixXd& Zprime,
                            const std::optional<MatrixXd>& B, const std::optional<MatrixXd>& U,
                            std::vector<Finding>* findings) {
  const MatrixXcd WlH = es.W_left.adjoint();
  const MatrixXcd phi = WlH * Z.cast<cdouble>();
  MatrixXcd phi_next = WlH * Zprime.cast<cdouble>();
  if (B && U) phi_next -= WlH * (*B * *U).cast<cdouble>();
  VectorXd scores(es.size());
  for (Index j = 0; j < es.size(); ++j) {
    const double denom = phi.row(j).norm();
    if (denom == 0.0) {
      scores(j) = std::numeric_limits<double>::quiet_NaN();
      if (findings)
        findings->push_back({"zero-eigenfunction",
                             "eigenfunction vanishes on the data; score undefined", -1, -1,
                             static_cast<int>(j)});
      continue;
    }
    scores(j) = (phi_next.row(j) - es.lambdas(j) * phi.row(j)).norm() / denom;
  }
  return scores;
}

/// All training states, one column per sample, used for fitted reconstruction.
inline MatrixXd stacked_states(const TrajectoryDataset& data) {
  Index total = 0;
  for (const auto& t : data.trajectories) total += t.rows();
  MatrixXd X(data.state_dim(), total);
  Index col = 0;
  for (const auto& t : data.trajectories) {
    X.middleCols(col, t.rows()) = t.transpose();
    col += t.rows();
  }
  return X;
}

inline MatrixXd stacked_rows(const TrajectoryDataset& data) {
  return stacked_states(data).transpose();
}

}  // namespace pipeline_detail

/// Fits a model: lift both sides of every snapshot pair, regress, fit the
/// reconstruction map. Kernel DMD derives its own feature library (the
/// given observables must be identity); Hankel regressors wrap the state in
/// a time-delay library with `delays` lags.
inline KoopmanModel fit(LibraryPtr observables, const RegressorConfig& config,
                        const TrajectoryDataset& data) {
  using pipeline_detail::staged;
  staged("data", ErrorKind::data, [&] {
    check_dataset(data);
    return 0;
  });
  const Index n = data.state_dim();
  if (!observables) observables = make_identity(n);
  if (observables->n_input() != n)
    throw Error(ErrorKind::config, "observables n_input does not match the data");

  const bool controlled = is_controlled(config.kind);
  if (controlled && !data.has_inputs())
    throw Error(ErrorKind::config, to_string(config.kind) + " needs input data");
  if (!controlled && data.has_inputs())
    throw Error(ErrorKind::config,
                "dataset carries inputs; use a controlled regressor (dmdc, edmdc, hdmdc)");

  if (config.kind == RegressorKind::hdmd || config.kind == RegressorKind::hdmdc) {
    if (observables->kind() != "identity")
      throw Error(ErrorKind::config, "hankel regressors take identity observables");
    observables = make_time_delay(n, config.delays);
  }
  if (config.kind == RegressorKind::kdmd && observables->kind() != "identity")
    throw Error(ErrorKind::config, "kdmd works on raw states; use identity observables");

  const LiftedPairs pairs =
      staged("lifting", ErrorKind::lifting, [&] { return lift_pairs(*observables, data); });

  RegressionResult reg = staged("regression", ErrorKind::regression, [&] {
    switch (config.kind) {
      case RegressorKind::dmd:
      case RegressorKind::hdmd: {
        auto r = fit_dmd(pairs.Z, pairs.Zprime, {config.rank, data.dt});
        r.method = to_string(config.kind);
        return r;
      }
      case RegressorKind::edmd: return fit_edmd(pairs.Z, pairs.Zprime, {config.rank, data.dt});
      case RegressorKind::dmdc:
      case RegressorKind::edmdc:
      case RegressorKind::hdmdc: {
        auto r = fit_edmdc(pairs.Z, pairs.Zprime, *pairs.U,
                           {config.rank, config.rank_out, data.dt});
        r.method = to_string(config.kind);
        return r;
      }
      case RegressorKind::kdmd:
        return fit_kdmd(pairs.Z, pairs.Zprime, config.kernel, {config.rank, data.dt});
    }
    throw Error(ErrorKind::regression, "unsupported regressor");
  });
  if (reg.kernel_library) observables = reg.kernel_library;

  ReconstructionFit recon = staged("reconstruction", ErrorKind::reconstruction, [&] {
    return fit_reconstruction(*observables, pipeline_detail::stacked_states(data),
                              config.rank.cutoff);
  });

  ModelMetadata meta;
  meta.method = reg.method;
  meta.m = pairs.Z.cols();
  meta.rank = reg.rank();
  meta.residual = reg.residual;
  meta.sigma_min = reg.sigma_min;
  meta.projected_modes = config.projected_modes;
  meta.z0 = observables->lift_trajectory(data.trajectories.front()).col(0);
  meta.findings = reg.findings;
  meta.findings.insert(meta.findings.end(), recon.findings.begin(), recon.findings.end());
  if (reg.kernel_library) {
    const MatrixXd Z = observables->lift_columns(pairs.Z);
    const MatrixXd Zp = observables->lift_columns(pairs.Zprime);
    meta.linearity_scores =
        pipeline_detail::score_pairs(reg.eigen, Z, Zp, reg.B, pairs.U, &meta.findings);
  } else {
    meta.linearity_scores = pipeline_detail::score_pairs(reg.eigen, pairs.Z, pairs.Zprime,
                                                         reg.B, pairs.U, &meta.findings);
  }

  RegressorConfig stored = config;
  return KoopmanModel(std::move(observables), std::move(reg), std::move(recon.map), data.dt,
                      stored, std::move(meta));
}

/// Overload taking an observables JSON config (rbf centers are sampled from
/// the training states when not given explicitly).
inline KoopmanModel fit(const json& observables_config, const RegressorConfig& config,
                        const TrajectoryDataset& data) {
  check_dataset(data);
  const MatrixXd rows = pipeline_detail::stacked_rows(data);
  LibraryPtr lib = library_from_json(observables_config, data.state_dim(), &rows);
  return fit(std::move(lib), config, data);
}

// ---------------------------------------------------------------------------

namespace pipeline_detail {

inline void check_input(const KoopmanModel& model, const std::optional<VectorXd>& u) {
  if (model.controlled() && !u)
    throw Error(ErrorKind::data, "controlled model needs an input");
  if (!model.controlled() && u) throw Error(ErrorKind::data, "model takes no input");
  if (u && u->size() != model.q()) throw Error(ErrorKind::data, "input has wrong dimension");
}

}  // namespace pipeline_detail

/// One step: C (A Phi(x) + B u). For time-delay models x is the stacked
/// window [x_k; ...; x_{k-d}].
inline VectorXd predict(const KoopmanModel& model, const VectorXd& x,
                        const std::optional<VectorXd>& u = std::nullopt) {
  pipeline_detail::check_input(model, u);
  VectorXd z = model.A() * model.observables().lift(x);
  if (u) z += *model.B() * *u;
  return model.C() * z;
}

/// Iterates z_{k+1} = A z_k + B u_k from z0 in lifted space; returns
/// N x (n_steps + 1), first column z0.
inline MatrixXd simulate_lifted(const KoopmanModel& model, const VectorXd& z0, Index n_steps,
                                const std::optional<MatrixXd>& U = std::nullopt) {
  if (n_steps < 0) throw Error(ErrorKind::data, "n_steps must be nonnegative");
  if (z0.size() != model.A().cols())
    throw Error(ErrorKind::data, "lifted state has wrong dimension");
  if (model.controlled() && !U) throw Error(ErrorKind::data, "controlled model needs inputs");
  if (!model.controlled() && U) throw Error(ErrorKind::data, "model takes no inputs");
  if (U && (U->cols() != n_steps || U->rows() != model.q()))
    throw Error(ErrorKind::data, "input matrix must be q x n_steps");
  MatrixXd Z(z0.size(), n_steps + 1);
  Z.col(0) = z0;
  for (Index k = 0; k < n_steps; ++k) {
    VectorXd next = model.A() * Z.col(k);
    if (U) next += *model.B() * U->col(k);
    Z.col(k + 1) = next;
  }
  return Z;
}

/// Lifts x0 once, evolves linearly in lifted space and reconstructs every
/// step. Returns (n_steps + 1) x n; the first row is x0 (for time-delay
/// models, its most recent state).
inline MatrixXd simulate(const KoopmanModel& model, const VectorXd& x0, Index n_steps,
                         const std::optional<MatrixXd>& U = std::nullopt) {
  const VectorXd z0 = model.observables().lift(x0);
  const MatrixXd Z = simulate_lifted(model, z0, n_steps, U);
  MatrixXd out = (model.C() * Z).transpose();
  if (x0.size() == model.n()) out.row(0) = x0.transpose();
  return out;
}

/// Time-delay convenience: warms up from the first d+1 raw states (rows in
/// time order) and simulates from the last of them.
inline MatrixXd simulate_from_window(const KoopmanModel& model, const MatrixXd& window,
                                     Index n_steps,
                                     const std::optional<MatrixXd>& U = std::nullopt) {
  const Index d = model.delays();
  if (window.rows() != d + 1 || window.cols() != model.n())
    throw Error(ErrorKind::data, "warm-up window needs exactly " + std::to_string(d + 1) +
                                     " states");
  VectorXd stacked(model.n() * (d + 1));
  for (Index lag = 0; lag <= d; ++lag)
    stacked.segment(lag * model.n(), model.n()) = window.row(d - lag).transpose();
  MatrixXd out = simulate(model, stacked, n_steps, U);
  out.row(0) = window.row(d);
  return out;
}

/// phi_j(x) = w_left_j^H Phi(x).
inline VectorXcd eigenfunctions(const KoopmanModel& model, const VectorXd& x) {
  return model.eigen().W_left.adjoint() * model.observables().lift(x).cast<cdouble>();
}

/// Eigenfunctions evaluated on lifted columns (r x m).
inline MatrixXcd eigenfunctions_lifted(const KoopmanModel& model, const MatrixXd& Z) {
  return model.eigen().W_left.adjoint() * Z.cast<cdouble>();
}

struct ModeRecord {
  cdouble lambda;
  cdouble mu;
  VectorXcd mode;      // v_j = C w_j, length n
  cdouble amplitude;   // phi_j at the first training snapshot
  double consistency;  // training linearity score
  bool branch_cut = false;
};

using ModeTable = std::vector<ModeRecord>;

inline ModeTable koopman_modes(const KoopmanModel& model) {
  const auto& es = model.eigen();
  const MatrixXcd V = model.C().cast<cdouble>() * model.lifted_modes();
  const VectorXcd amp = es.W_left.adjoint() * model.metadata().z0.cast<cdouble>();
  ModeTable table;
  for (Index j = 0; j < es.size(); ++j) {
    ModeRecord rec;
    rec.lambda = es.lambdas(j);
    rec.mu = es.mus(j);
    rec.mode = V.col(j);
    rec.amplitude = amp(j);
    rec.consistency = j < model.metadata().linearity_scores.size()
                          ? model.metadata().linearity_scores(j)
                          : std::numeric_limits<double>::quiet_NaN();
    rec.branch_cut = j < static_cast<Index>(es.branch_cut.size()) &&
                     es.branch_cut[static_cast<std::size_t>(j)];
    table.push_back(std::move(rec));
  }
  return table;
}

struct ModeSumPrediction {
  VectorXd state;
  /// max |Im| discarded when projecting the complex sum onto the reals.
  double imag_leakage = 0.0;
};

/// sum_j lambda_j^k phi_j(x0) v_j, the Koopman mode expansion of the state
/// after k steps (unforced models).
inline ModeSumPrediction mode_sum_prediction(const KoopmanModel& model, const VectorXd& x0,
                                             Index k) {
  const auto& es = model.eigen();
  const VectorXcd phi = eigenfunctions(model, x0);
  const MatrixXcd V = model.C().cast<cdouble>() * model.lifted_modes();
  VectorXcd sum = VectorXcd::Zero(model.C().rows());
  for (Index j = 0; j < es.size(); ++j)
    sum += std::pow(es.lambdas(j), static_cast<double>(k)) * phi(j) * V.col(j);
  return {sum.real(), sum.imag().cwiseAbs().maxCoeff()};
}

struct ConsistencyReport {
  VectorXd scores;
  std::vector<Finding> findings;
};

/// score_j = |phi_j(X') - lambda_j phi_j(X)| / |phi_j(X)| over all snapshot
/// pairs of `data` (the input contribution is removed for controlled models).
inline ConsistencyReport linearity_consistency(const KoopmanModel& model,
                                               const TrajectoryDataset& data) {
  ConsistencyReport rep;
  const auto& lib = model.observables();
  if (lib.kind() == "kernel_features") {
    const SnapshotPairs raw = build_snapshot_pairs(data);
    rep.scores = pipeline_detail::score_pairs(model.eigen(), lib.lift_columns(raw.X),
                                              lib.lift_columns(raw.Xprime), model.B(), raw.U,
                                              &rep.findings);
    return rep;
  }
  const LiftedPairs pairs = lift_pairs(lib, data);
  rep.scores = pipeline_detail::score_pairs(model.eigen(), pairs.Z, pairs.Zprime, model.B(),
                                            pairs.U, &rep.findings);
  return rep;
}

struct ContinuousSpectrum {
  VectorXcd mus;
  std::vector<Finding> findings;
};

inline ContinuousSpectrum continuous_eigenvalues(const KoopmanModel& model) {
  ContinuousSpectrum out;
  out.mus = model.eigen().mus;
  out.findings = model.eigen().findings;
  return out;
}

// ---------------------------------------------------------------------------
// Model JSON (schema v1).

inline json findings_to_json(const std::vector<Finding>& fs) {
  json arr = json::array();
  for (const auto& f : fs)
    arr.push_back({{"kind", f.kind},
                   {"message", f.message},
                   {"trajectory", f.trajectory},
                   {"row", f.row},
                   {"column", f.column}});
  return arr;
}

inline std::vector<Finding> findings_from_json(const json& arr) {
  std::vector<Finding> fs;
  for (const auto& f : arr)
    fs.push_back({f.at("kind").get<std::string>(), f.at("message").get<std::string>(),
                  f.value("trajectory", -1), f.value("row", -1), f.value("column", -1)});
  return fs;
}

inline json model_to_json(const KoopmanModel& model) {
  const auto& es = model.eigen();
  const auto& meta = model.metadata();
  json scores = json::array();
  for (Index j = 0; j < meta.linearity_scores.size(); ++j) {
    const double s = meta.linearity_scores(j);
    if (std::isfinite(s))
      scores.push_back(s);
    else
      scores.push_back(nullptr);
  }
  json branch = json::array();
  for (bool b : es.branch_cut) branch.push_back(b);

  json j = {{"schema_version", kModelSchemaVersion},
            {"dt", model.dt()},
            {"n", model.n()},
            {"q", model.q()},
            {"observables", model.observables().to_json()},
            {"regressor", regressor_to_json(model.regressor())},
            {"A", matrix_to_json(model.A())},
            {"C", matrix_to_json(model.C())},
            {"C_exact", model.reconstruction().exact},
            {"eigen",
             {{"lambdas", vector_to_json(es.lambdas)},
              {"mus", json::array()},
              {"W_right", matrix_to_json(es.W_right)},
              {"W_left", matrix_to_json(es.W_left)},
              {"modes", matrix_to_json(model.regression().exact_modes)},
              {"branch_cut", branch}}},
            {"metadata",
             {{"method", meta.method},
              {"m", meta.m},
              {"rank", meta.rank},
              {"residual", meta.residual},
              {"sigma_min", meta.sigma_min},
              {"z0", matrix_to_json(MatrixXd(meta.z0))},
              {"linearity_scores", scores},
              {"projected_modes", meta.projected_modes},
              {"findings", findings_to_json(meta.findings)}}}};
  // mu may be -inf (lambda = 0), which JSON cannot hold: store null.
  for (Index k = 0; k < es.mus.size(); ++k) {
    if (std::isfinite(es.mus(k).real()) && std::isfinite(es.mus(k).imag()))
      j["eigen"]["mus"].push_back(json::array({es.mus(k).real(), es.mus(k).imag()}));
    else
      j["eigen"]["mus"].push_back(nullptr);
  }
  if (model.B()) j["B"] = matrix_to_json(*model.B());
  return j;
}

inline KoopmanModel model_from_json(const json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorKind::data, "model must be a JSON object");
    if (j.value("schema_version", -1) != kModelSchemaVersion)
      throw Error(ErrorKind::data, "unsupported model schema version");
    const double dt = j.at("dt").get<double>();
    const Index n = j.at("n").get<Index>();
    const Index q = j.at("q").get<Index>();
    LibraryPtr lib = library_from_json(j.at("observables"));
    if (lib->n_input() != n) throw Error(ErrorKind::data, "model n does not match observables");

    RegressionResult reg;
    reg.A = matrix_from_json(j.at("A"));
    reg.A_reduced = reg.A;
    if (j.contains("B")) reg.B = matrix_from_json(j.at("B"));
    if ((reg.B ? reg.B->cols() : 0) != q)
      throw Error(ErrorKind::data, "model q does not match B");
    const json& e = j.at("eigen");
    reg.eigen.lambdas = complex_vector_from_json(e.at("lambdas"));
    reg.eigen.W_right = complex_matrix_from_json(e.at("W_right"));
    reg.eigen.W_left = complex_matrix_from_json(e.at("W_left"));
    reg.exact_modes = complex_matrix_from_json(e.at("modes"));
    const Index r = reg.eigen.lambdas.size();
    reg.eigen.mus.resize(r);
    const json& mus = e.at("mus");
    if (mus.size() != static_cast<std::size_t>(r))
      throw Error(ErrorKind::data, "eigen.mus has wrong length");
    for (Index k = 0; k < r; ++k) {
      const json& v = mus[static_cast<std::size_t>(k)];
      reg.eigen.mus(k) = v.is_null()
                             ? cdouble(-std::numeric_limits<double>::infinity(), 0.0)
                             : detail::complex_from_json(v);
    }
    for (const auto& b : e.value("branch_cut", json::array()))
      reg.eigen.branch_cut.push_back(b.get<bool>());
    reg.eigen.branch_cut.resize(static_cast<std::size_t>(r), false);

    const Index N = lib->n_output();
    if (reg.A.rows() != N || reg.A.cols() != N)
      throw Error(ErrorKind::data, "A does not match the lifted dimension");
    if (reg.B && reg.B->rows() != N) throw Error(ErrorKind::data, "B has wrong row count");
    if (reg.eigen.W_right.rows() != N || reg.eigen.W_right.cols() != r ||
        reg.eigen.W_left.rows() != N || reg.eigen.W_left.cols() != r ||
        reg.exact_modes.rows() != N || reg.exact_modes.cols() != r)
      throw Error(ErrorKind::data, "eigenvector shapes do not match");

    ReconstructionMap C{matrix_from_json(j.at("C")), j.value("C_exact", false)};
    if (C.C.rows() != n || C.C.cols() != N)
      throw Error(ErrorKind::data, "C has wrong shape");

    const json& m = j.at("metadata");
    ModelMetadata meta;
    meta.method = m.at("method").get<std::string>();
    reg.method = meta.method;
    meta.m = m.at("m").get<Index>();
    meta.rank = m.at("rank").get<Index>();
    meta.residual = m.at("residual").get<double>();
    meta.sigma_min = m.at("sigma_min").get<double>();
    reg.residual = meta.residual;
    reg.sigma_min = meta.sigma_min;
    meta.z0 = matrix_from_json(m.at("z0")).col(0);
    const json& scores = m.at("linearity_scores");
    meta.linearity_scores.resize(static_cast<Index>(scores.size()));
    for (std::size_t k = 0; k < scores.size(); ++k)
      meta.linearity_scores(static_cast<Index>(k)) =
          scores[k].is_null() ? std::numeric_limits<double>::quiet_NaN()
                              : scores[k].get<double>();
    meta.projected_modes = m.value("projected_modes", false);
    meta.findings = findings_from_json(m.value("findings", json::array()));
    if (meta.z0.size() != N) throw Error(ErrorKind::data, "metadata z0 has wrong size");

    RegressorConfig rc = regressor_from_json(j.at("regressor"));
    return KoopmanModel(std::move(lib), std::move(reg), std::move(C), dt, rc, std::move(meta));
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::data, std::string("corrupt model: ") + ex.what());
  } catch (const Error& ex) {
    throw Error(ErrorKind::data, std::string("corrupt model: ") + ex.what());
  }
}

}  // namespace koopman
