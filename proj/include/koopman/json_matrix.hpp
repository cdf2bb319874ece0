#pragma once

// Matrix <-> JSON conversion shared by every serialized object.
// Layout: {"rows": r, "cols": c, "data": [...]} row-major; complex entries are
// [re, im] pairs.

#include <complex>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "koopman/error.hpp"

namespace koopman {

using json = nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline json matrix_to_json(const Eigen::MatrixXcd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      data.push_back(json::array({m(r, c).real(), m(r, c).imag()}));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline json vector_to_json(const Eigen::VectorXcd& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    data.push_back(json::array({v(i).real(), v(i).imag()}));
  return data;
}

namespace detail {

inline void check_shape(const json& j, Eigen::Index& rows, Eigen::Index& cols) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw Error(ErrorKind::data, "matrix must be an object with rows, cols and data");
  rows = j.at("rows").get<Eigen::Index>();
  cols = j.at("cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0 || !j.at("data").is_array() ||
      j.at("data").size() != static_cast<std::size_t>(rows * cols))
    throw Error(ErrorKind::data, "matrix data length does not match its shape");
}

inline std::complex<double> complex_from_json(const json& e) {
  if (!e.is_array() || e.size() != 2)
    throw Error(ErrorKind::data, "complex value must be a [re, im] pair");
  return {e[0].get<double>(), e[1].get<double>()};
}

}  // namespace detail

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  Eigen::Index rows = 0, cols = 0;
  detail::check_shape(j, rows, cols);
  Eigen::MatrixXd m(rows, cols);
  const auto& data = j.at("data");
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c].get<double>();
  return m;
}

inline Eigen::MatrixXcd complex_matrix_from_json(const json& j) {
  Eigen::Index rows = 0, cols = 0;
  detail::check_shape(j, rows, cols);
  Eigen::MatrixXcd m(rows, cols);
  const auto& data = j.at("data");
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = detail::complex_from_json(data[r * cols + c]);
  return m;
}

inline Eigen::VectorXcd complex_vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::data, "complex vector must be an array");
  Eigen::VectorXcd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = detail::complex_from_json(j[i]);
  return v;
}

}  // namespace koopman
