#pragma once

// Command-line front end: fit, simulate, eig, diff, bench.
//
// Exit codes: 0 success, 1 usage error, 2 bad config / unknown method or
// system, 3 bad data or model file, 4 regression failure.

#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "koopman/benchmarks.hpp"
#include "koopman/differentiation.hpp"
#include "koopman/error.hpp"
#include "koopman/io.hpp"
#include "koopman/pipeline.hpp"

namespace koopman::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRegression = 4;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return kExitConfig;
    case ErrorKind::data:
    case ErrorKind::lifting: return kExitData;
    case ErrorKind::regression:
    case ErrorKind::reconstruction: return kExitRegression;
  }
  return kExitUsage;
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool json_output = false;
  bool quiet = false;
};

/// Parsed `fit` config file: {observables, regressor, dt?, inputs?, output?}.
struct FitConfig {
  json observables = {{"kind", "identity"}};
  RegressorConfig regressor;
  std::optional<double> dt;
  Index inputs = 0;
  std::optional<std::string> output;
};

inline FitConfig parse_fit_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("malformed config JSON: ") + e.what());
  }
  try {
    if (!j.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
    for (const auto& [key, _] : j.items())
      if (key != "observables" && key != "regressor" && key != "dt" && key != "inputs" &&
          key != "output")
        throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    FitConfig cfg;
    if (j.contains("observables")) cfg.observables = j.at("observables");
    if (!j.contains("regressor")) throw Error(ErrorKind::config, "config needs a 'regressor'");
    cfg.regressor = regressor_from_json(j.at("regressor"));
    if (j.contains("dt")) {
      cfg.dt = j.at("dt").get<double>();
      if (!(*cfg.dt > 0.0)) throw Error(ErrorKind::config, "dt must be positive");
    }
    cfg.inputs = j.value("inputs", Index{0});
    if (cfg.inputs < 0) throw Error(ErrorKind::config, "inputs must be nonnegative");
    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("bad config: ") + e.what());
  }
}

inline KoopmanModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::data, std::string("corrupt model: ") + e.what());
  }
  return model_from_json(j);
}

inline VectorXd parse_vector(const std::string& s) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double v = 0.0;
    if (!io::detail::parse_double(io::detail::trim(cell), v))
      throw Error(ErrorKind::data, "cannot parse number '" + cell + "'");
    vals.push_back(v);
  }
  if (vals.empty()) throw Error(ErrorKind::data, "empty vector");
  return Eigen::Map<VectorXd>(vals.data(), static_cast<Index>(vals.size()));
}

inline std::string format_complex(cdouble z) {
  std::ostringstream os;
  os << std::setprecision(10) << z.real() << (z.imag() < 0 ? " - " : " + ")
     << std::abs(z.imag()) << "i";
  return os.str();
}

// ---------------------------------------------------------------------------

inline int cmd_fit(const std::string& config_path, const std::string& data_path,
                   std::optional<std::string> out_path, const GlobalOptions& g,
                   std::ostream& out) {
  const FitConfig cfg = parse_fit_config(io::read_text(config_path));
  if (!out_path) out_path = cfg.output;
  if (!out_path) throw Error(ErrorKind::config, "no output path (use --out or 'output')");
  const TrajectoryDataset data = io::read_dataset(data_path, cfg.inputs, cfg.dt);
  const KoopmanModel model = fit(cfg.observables, cfg.regressor, data);
  const json model_json = model_to_json(model);
  io::write_atomic(*out_path, model_json.dump(1) + "\n");

  const auto& es = model.eigen();
  const Index top = std::min<Index>(10, es.size());
  if (g.json_output) {
    json rep = {{"m", model.metadata().m},
                {"rank", model.metadata().rank},
                {"residual", model.metadata().residual},
                {"lambdas", json::array()},
                {"model", *out_path}};
    for (Index j = 0; j < top; ++j)
      rep["lambdas"].push_back(json::array({es.lambdas(j).real(), es.lambdas(j).imag()}));
    out << rep.dump() << "\n";
  } else if (!g.quiet) {
    out << "snapshot pairs m : " << model.metadata().m << "\n"
        << "rank             : " << model.metadata().rank << "\n"
        << "residual         : " << model.metadata().residual << "\n"
        << "leading eigenvalues:\n";
    for (Index j = 0; j < top; ++j)
      out << "  " << std::setw(3) << j << "  lambda = " << format_complex(es.lambdas(j))
          << "  |lambda| = " << std::setprecision(10) << std::abs(es.lambdas(j))
          << "  mu = " << format_complex(es.mus(j)) << "\n";
    out << "model written to " << *out_path << "\n";
  }
  return kExitOk;
}

inline int cmd_simulate(const std::string& model_path, const std::string& x0_text, Index steps,
                        const std::optional<std::string>& input_csv, const std::string& out_path,
                        const GlobalOptions& g, std::ostream& out) {
  const KoopmanModel model = load_model(model_path);
  const VectorXd x0 = parse_vector(x0_text);
  if (x0.size() != model.observables().lift_input_dim())
    throw Error(ErrorKind::data, "x0 has dimension " + std::to_string(x0.size()) +
                                     ", model expects " +
                                     std::to_string(model.observables().lift_input_dim()));
  if (steps < 0) throw Error(ErrorKind::data, "steps must be nonnegative");
  std::optional<MatrixXd> U;
  if (model.controlled()) {
    if (!input_csv) throw Error(ErrorKind::data, "controlled model needs --inputs");
    const io::CsvTable t = io::read_csv(*input_csv);
    if (t.blocks.size() != 1) throw Error(ErrorKind::data, "input CSV must hold one block");
    const MatrixXd& blk = t.blocks.front();
    if (blk.cols() != model.q() + 1 || blk.rows() < steps)
      throw Error(ErrorKind::data, "input CSV needs a time column, q input columns and at "
                                   "least `steps` rows");
    U = blk.block(0, 1, steps, model.q()).transpose();
  } else if (input_csv) {
    throw Error(ErrorKind::data, "model takes no inputs");
  }
  const MatrixXd traj = simulate(model, x0, steps, U);
  MatrixXd block(traj.rows(), traj.cols() + 1);
  for (Index k = 0; k < traj.rows(); ++k) block(k, 0) = static_cast<double>(k) * model.dt();
  block.rightCols(traj.cols()) = traj;
  io::write_atomic(out_path, io::format_csv(io::default_header(model.n()), {block}));
  if (!g.quiet && !g.json_output)
    out << "wrote " << traj.rows() << " rows to " << out_path << "\n";
  return kExitOk;
}

inline int cmd_eig(const std::string& model_path, const std::string& format,
                   const std::optional<std::string>& data_path, const GlobalOptions& g,
                   std::ostream& out) {
  if (format != "table" && format != "csv" && format != "json")
    throw Error(ErrorKind::config, "unknown format '" + format + "'");
  const KoopmanModel model = load_model(model_path);
  const auto& es = model.eigen();
  std::optional<VectorXd> scores;
  if (data_path) {
    const TrajectoryDataset data = io::read_dataset(*data_path, model.q(), model.dt());
    scores = linearity_consistency(model, data).scores;
  }
  const std::string fmt = g.json_output ? "json" : format;
  if (fmt == "json") {
    json rows = json::array();
    for (Index j = 0; j < es.size(); ++j) {
      json row = {{"index", j},
                   {"lambda", json::array({es.lambdas(j).real(), es.lambdas(j).imag()})},
                   {"abs_lambda", std::abs(es.lambdas(j))}};
      if (std::isfinite(es.mus(j).real()))
        row["mu"] = json::array({es.mus(j).real(), es.mus(j).imag()});
      else
        row["mu"] = nullptr;
      if (scores) row["score"] = std::isfinite((*scores)(j)) ? json((*scores)(j)) : json();
      rows.push_back(row);
    }
    out << json{{"eigenvalues", rows}}.dump() << "\n";
  } else if (fmt == "csv") {
    out << "index,lambda_re,lambda_im,abs_lambda,mu_re,mu_im";
    if (scores) out << ",score";
    out << "\n";
    for (Index j = 0; j < es.size(); ++j) {
      out << j << ',' << io::format_double(es.lambdas(j).real()) << ','
          << io::format_double(es.lambdas(j).imag()) << ','
          << io::format_double(std::abs(es.lambdas(j))) << ','
          << io::format_double(es.mus(j).real()) << ',' << io::format_double(es.mus(j).imag());
      if (scores) out << ',' << io::format_double((*scores)(j));
      out << "\n";
    }
  } else {
    out << std::setw(5) << "index" << std::setw(36) << "lambda" << std::setw(16) << "|lambda|"
        << std::setw(36) << "mu";
    if (scores) out << std::setw(16) << "score";
    out << "\n";
    for (Index j = 0; j < es.size(); ++j) {
      out << std::setw(5) << j << std::setw(36) << format_complex(es.lambdas(j))
          << std::setw(16) << std::setprecision(10) << std::abs(es.lambdas(j)) << std::setw(36)
          << format_complex(es.mus(j));
      if (scores) out << std::setw(16) << (*scores)(j);
      out << "\n";
    }
  }
  return kExitOk;
}

inline int cmd_diff(const std::string& data_path, const DifferentiationConfig& cfg,
                    const std::string& out_path, const GlobalOptions& g, std::ostream& out) {
  const io::CsvTable table = io::read_csv(data_path);
  if (table.blocks.empty()) throw Error(ErrorKind::data, "no trajectories");
  std::vector<MatrixXd> blocks;
  for (const MatrixXd& blk : table.blocks) {
    if (blk.cols() < 2) throw Error(ErrorKind::data, "CSV needs a time column and data");
    MatrixXd d(blk.rows(), blk.cols());
    d.col(0) = blk.col(0);
    d.rightCols(blk.cols() - 1) =
        differentiate(cfg, blk.rightCols(blk.cols() - 1), blk.col(0));
    blocks.push_back(std::move(d));
  }
  const auto header =
      table.header.empty() ? io::default_header(table.blocks.front().cols() - 1) : table.header;
  io::write_atomic(out_path, io::format_csv(header, blocks));
  if (!g.quiet && !g.json_output) out << "wrote derivatives to " << out_path << "\n";
  return kExitOk;
}

struct BenchOptions {
  std::string system;
  std::optional<std::string> x0;
  double dt = 0.02;
  Index steps = 500;
  std::vector<std::string> params;
  bool excite = false;
};

inline int cmd_bench(const BenchOptions& opt, const std::string& out_path,
                     const GlobalOptions& g, std::ostream& out) {
  bench::Params overrides;
  for (const auto& kv : opt.params) {
    const auto eq = kv.find('=');
    double v = 0.0;
    if (eq == std::string::npos || !io::detail::parse_double(kv.substr(eq + 1), v))
      throw Error(ErrorKind::config, "bad --params entry '" + kv + "' (want key=value)");
    overrides[kv.substr(0, eq)] = v;
  }
  if (!(opt.dt > 0.0)) throw Error(ErrorKind::config, "dt must be positive");
  if (opt.steps < 0) throw Error(ErrorKind::config, "steps must be nonnegative");
  auto take = [&](const std::string& key, double fallback) {
    auto it = overrides.find(key);
    if (it == overrides.end()) return fallback;
    const double v = it->second;
    overrides.erase(it);
    return v;
  };

  const Index rows = opt.steps + 1;
  VectorXd t(rows);
  for (Index k = 0; k < rows; ++k) t(k) = static_cast<double>(k) * opt.dt;
  MatrixXd states, inputs;
  std::mt19937_64 rng(g.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  if (opt.system == "linear2d") {
    VectorXd x0 = opt.x0 ? parse_vector(*opt.x0) : VectorXd::Unit(2, 0);
    if (x0.size() != 2) throw Error(ErrorKind::data, "linear2d needs a 2-dimensional x0");
    states = bench::iterate_linear(bench::linear2d_matrix(), x0, opt.steps);
  } else if (opt.system == "torus") {
    VectorXd f = bench::default_torus_freqs(), a = bench::default_torus_amps();
    f(0) = take("f1", f(0));
    f(1) = take("f2", f(1));
    a(0) = take("a1", a(0));
    a(1) = take("a2", a(1));
    states = bench::torus_signal(t, f, a);
  } else if (opt.system == "drss") {
    const auto n = static_cast<Index>(take("n", 3));
    const auto q = static_cast<Index>(take("q", 1));
    const auto ss = bench::drss(n, q, g.seed, take("rho_max", 0.9));
    VectorXd x0(n);
    if (opt.x0) {
      x0 = parse_vector(*opt.x0);
      if (x0.size() != n) throw Error(ErrorKind::data, "x0 does not match drss n");
    } else {
      for (Index i = 0; i < n; ++i) x0(i) = normal(rng);
    }
    inputs.resize(rows, q);
    for (Index k = 0; k < rows; ++k)
      for (Index c = 0; c < q; ++c) inputs(k, c) = normal(rng);
    states = bench::iterate_linear(ss.A, x0, opt.steps, ss.B, inputs);
  } else {
    bench::SystemSpec spec = bench::system(opt.system);
    for (const auto& [k, v] : spec.params) spec.params[k] = take(k, v);
    VectorXd x0 = VectorXd::Ones(spec.n);
    if (opt.x0) x0 = parse_vector(*opt.x0);
    if (x0.size() != spec.n)
      throw Error(ErrorKind::data, "x0 must have " + std::to_string(spec.n) + " entries");
    if (opt.excite && spec.q > 0) {
      inputs.resize(rows, spec.q);
      for (Index k = 0; k < rows; ++k)
        for (Index c = 0; c < spec.q; ++c) inputs(k, c) = normal(rng);
    }
    states = bench::integrate_rk4(spec, x0, opt.dt, opt.steps, inputs);
  }
  if (!overrides.empty())
    throw Error(ErrorKind::config, "unknown parameter '" + overrides.begin()->first + "'");

  const Index q = inputs.cols();
  MatrixXd block(rows, 1 + states.cols() + q);
  block.col(0) = t;
  block.middleCols(1, states.cols()) = states;
  if (q > 0) block.rightCols(q) = inputs;
  io::write_atomic(out_path, io::format_csv(io::default_header(states.cols(), q), {block}));
  if (!g.quiet && !g.json_output) out << "wrote " << rows << " rows to " << out_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Parses argv-style arguments (without the program name) and runs one
/// subcommand. All diagnostics go to `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Koopman operator identification toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_flag("--json", g.json_output, "Machine-readable output");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  std::string config_path, data_path, out_path, model_path, x0, format = "table", method = "fd2";
  std::optional<std::string> out_opt, inputs_csv, eig_data;
  Index steps = 0;

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model from trajectory CSV");
  fit_cmd->add_option("--config", config_path, "Fit config JSON")->required();
  fit_cmd->add_option("--data", data_path, "Trajectory CSV")->required();
  fit_cmd->add_option("--out", out_opt, "Output model JSON");

  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a fitted model");
  sim_cmd->add_option("--model", model_path, "Model JSON")->required();
  sim_cmd->add_option("--x0", x0, "Initial state, comma separated")->required();
  sim_cmd->add_option("--steps", steps, "Number of steps")->required();
  sim_cmd->add_option("--inputs", inputs_csv, "Input CSV (time + q columns)");
  sim_cmd->add_option("--out", out_path, "Output CSV")->required();

  auto* eig_cmd = app.add_subcommand("eig", "Print the model spectrum");
  eig_cmd->add_option("--model", model_path, "Model JSON")->required();
  eig_cmd->add_option("--format", format, "table, csv or json");
  eig_cmd->add_option("--data", eig_data, "Trajectory CSV for linearity scores");

  DifferentiationConfig dcfg;
  auto* diff_cmd = app.add_subcommand("diff", "Differentiate trajectory CSV columns");
  diff_cmd->add_option("--data", data_path, "Trajectory CSV")->required();
  diff_cmd->add_option("--method", method,
                       "fd2, fd4, savitzky_golay, spectral, spline, total_variation");
  diff_cmd->add_option("--window", dcfg.window, "Savitzky-Golay window");
  diff_cmd->add_option("--smoothing", dcfg.smoothing, "Spline smoothing");
  diff_cmd->add_option("--tv-lambda", dcfg.tv_lambda, "Total-variation weight");
  diff_cmd->add_option("--tv-iters", dcfg.tv_iters, "Total-variation iterations");
  diff_cmd->add_flag("--periodic", dcfg.periodic, "Signal is periodic (spectral)");
  diff_cmd->add_option("--out", out_path, "Output CSV")->required();

  BenchOptions bopt;
  auto* bench_cmd = app.add_subcommand("bench", "Generate benchmark trajectories");
  bench_cmd->add_option("--system", bopt.system,
                        "slow_manifold, vdp_osc, lorenz, forced_duffing, linear2d, torus, drss")
      ->required();
  bench_cmd->add_option("--x0", bopt.x0, "Initial state, comma separated");
  bench_cmd->add_option("--dt", bopt.dt, "Time step");
  bench_cmd->add_option("--steps", bopt.steps, "Number of steps");
  bench_cmd->add_option("--params", bopt.params, "Parameter overrides key=value");
  bench_cmd->add_flag("--excite", bopt.excite, "Random inputs for forced systems");
  bench_cmd->add_option("--out", out_path, "Output CSV")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(config_path, data_path, out_opt, g, out);
    if (sim_cmd->parsed())
      return cmd_simulate(model_path, x0, steps, inputs_csv, out_path, g, out);
    if (eig_cmd->parsed()) return cmd_eig(model_path, format, eig_data, g, out);
    if (diff_cmd->parsed()) {
      dcfg.method = diff_method_from_string(method);
      return cmd_diff(data_path, dcfg, out_path, g, out);
    }
    if (bench_cmd->parsed()) return cmd_bench(bopt, out_path, g, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace koopman::cli
