#pragma once

// Trajectory CSV and atomic file output.
//
// CSV layout: optional header line; column 0 = time (strictly increasing,
// uniform spacing), then the state columns, then optional input columns.
// Blank lines separate trajectories.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>
#include <vector>

#include <Eigen/Dense>

#include "koopman/error.hpp"
#include "koopman/types.hpp"

namespace koopman::io {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct CsvTable {
  std::vector<std::string> header;  // empty when the file had none
  std::vector<MatrixXd> blocks;     // one per blank-line-separated block
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::size_t line_no = 0;
  bool seen_data = false;
  auto flush = [&] {
    if (rows.empty()) return;
    MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < width; ++c)
        m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    table.blocks.push_back(std::move(m));
    rows.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) {
      flush();
      continue;
    }
    const auto cells = detail::split(t);
    std::vector<double> vals(cells.size());
    bool numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i)
      numeric = numeric && detail::parse_double(cells[i], vals[i]);
    if (!numeric) {
      if (!seen_data && table.header.empty()) {
        table.header = cells;
        width = cells.size();
        continue;
      }
      throw Error(ErrorKind::data, "non-numeric value on CSV line " + std::to_string(line_no));
    }
    if (width == 0) width = vals.size();
    if (vals.size() != width)
      throw Error(ErrorKind::data, "CSV line " + std::to_string(line_no) + " has " +
                                       std::to_string(vals.size()) + " columns, expected " +
                                       std::to_string(width));
    seen_data = true;
    rows.push_back(std::move(vals));
  }
  flush();
  return table;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::data, "cannot open '" + path + "'");
  return parse_csv(in);
}

/// Sample interval of a time column; throws unless strictly increasing and
/// uniform to 1e-6 relative.
inline double uniform_dt(const VectorXd& t) {
  if (t.size() < 2) throw Error(ErrorKind::data, "trajectory too short (need at least 2 samples)");
  const double dt = (t(t.size() - 1) - t(0)) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) throw Error(ErrorKind::data, "time column must be strictly increasing");
  for (Index i = 1; i < t.size(); ++i) {
    const double step = t(i) - t(i - 1);
    if (!(step > 0.0)) throw Error(ErrorKind::data, "time column must be strictly increasing");
    if (std::abs(step - dt) > 1e-6 * dt)
      throw Error(ErrorKind::data, "time column is not uniformly spaced");
  }
  return dt;
}

/// Splits CSV blocks into a dataset: the last `n_inputs` columns are inputs.
/// dt comes from the time columns unless `dt_override` is given.
inline TrajectoryDataset to_dataset(const CsvTable& table, Index n_inputs,
                                    std::optional<double> dt_override = std::nullopt) {
  if (table.blocks.empty()) throw Error(ErrorKind::data, "no trajectories");
  TrajectoryDataset data;
  std::optional<double> dt = dt_override;
  for (std::size_t b = 0; b < table.blocks.size(); ++b) {
    const MatrixXd& blk = table.blocks[b];
    const Index n = blk.cols() - 1 - n_inputs;
    if (n < 1)
      throw Error(ErrorKind::data, "CSV needs a time column and at least one state column");
    if (blk.rows() < 2)
      throw Error(ErrorKind::data, "trajectory too short (trajectory " + std::to_string(b) +
                                       " has " + std::to_string(blk.rows()) + " sample)");
    const double block_dt = uniform_dt(blk.col(0));
    if (!dt_override) {
      if (dt && std::abs(*dt - block_dt) > 1e-6 * *dt)
        throw Error(ErrorKind::data, "trajectories use different sample intervals");
      if (!dt) dt = block_dt;
    }
    data.trajectories.push_back(blk.middleCols(1, n));
    if (n_inputs > 0) data.inputs.push_back(blk.rightCols(n_inputs));
  }
  data.dt = *dt;
  check_dataset(data);
  return data;
}

inline TrajectoryDataset read_dataset(const std::string& path, Index n_inputs,
                                      std::optional<double> dt_override = std::nullopt) {
  return to_dataset(read_csv(path), n_inputs, dt_override);
}

/// CSV text for blocks of rows; blocks are separated by one blank line.
inline std::string format_csv(const std::vector<std::string>& header,
                              const std::vector<MatrixXd>& blocks) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out += ',';
      out += header[i];
    }
    out += '\n';
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b) out += '\n';
    const MatrixXd& m = blocks[b];
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) {
        if (c) out += ',';
        out += format_double(m(r, c));
      }
      out += '\n';
    }
  }
  return out;
}

inline std::vector<std::string> default_header(Index n, Index q = 0) {
  std::vector<std::string> h{"t"};
  for (Index i = 0; i < n; ++i) h.push_back("x" + std::to_string(i));
  for (Index i = 0; i < q; ++i) h.push_back("u" + std::to_string(i));
  return h;
}

/// Writes to a temporary file next to `path`, then renames it into place,
/// so `path` is either untouched or complete.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "cannot write '" + path + "'");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorKind::data, "failed writing '" + path + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::data, "cannot move output into '" + path + "'");
  }
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::data, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace koopman::io
