#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "koopman/error.hpp"
#include "koopman/json_matrix.hpp"

namespace koopman {

/// Kernel used by kernel DMD.
///   gaussian:   k(x, y) = exp(-|x - y|^2 / (2 sigma^2))
///   polynomial: k(x, y) = (offset + x^T y)^degree
/// reg_eps adds reg_eps * m * I to the Gram matrix.
struct KernelConfig {
  enum class Kind { gaussian, polynomial };
  Kind kind = Kind::gaussian;
  double sigma = 1.0;
  int degree = 2;
  double offset = 1.0;
  double reg_eps = 0.0;

  void check() const {
    if (kind == Kind::gaussian && !(sigma > 0.0))
      throw Error(ErrorKind::config, "gaussian kernel sigma must be positive");
    if (kind == Kind::polynomial && degree < 1)
      throw Error(ErrorKind::config, "polynomial kernel degree must be at least 1");
    if (kind == Kind::polynomial && !(offset >= 0.0))
      throw Error(ErrorKind::config, "polynomial kernel offset must be nonnegative");
    if (!(reg_eps >= 0.0)) throw Error(ErrorKind::config, "reg_eps must be nonnegative");
  }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y) const {
    if (kind == Kind::gaussian) return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
    return std::pow(offset + x.dot(y), degree);
  }
};

/// K(i, j) = k(A.col(i), B.col(j)), filled row by row.
inline Eigen::MatrixXd gram_matrix(const KernelConfig& kernel, const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K(A.cols(), B.cols());
  for (Eigen::Index i = 0; i < A.cols(); ++i)
    for (Eigen::Index j = 0; j < B.cols(); ++j) K(i, j) = kernel(A.col(i), B.col(j));
  return K;
}

inline json kernel_to_json(const KernelConfig& k) {
  json j = {{"kind", k.kind == KernelConfig::Kind::gaussian ? "gaussian" : "polynomial"},
            {"reg_eps", k.reg_eps}};
  if (k.kind == KernelConfig::Kind::gaussian) {
    j["sigma"] = k.sigma;
  } else {
    j["degree"] = k.degree;
    j["offset"] = k.offset;
  }
  return j;
}

inline KernelConfig kernel_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::config, "kernel must be an object");
  for (const auto& [key, _] : j.items())
    if (key != "kind" && key != "sigma" && key != "degree" && key != "offset" &&
        key != "reg_eps")
      throw Error(ErrorKind::config, "unknown kernel key '" + key + "'");
  KernelConfig k;
  const std::string kind = j.value("kind", std::string("gaussian"));
  if (kind == "gaussian") {
    k.kind = KernelConfig::Kind::gaussian;
  } else if (kind == "polynomial") {
    k.kind = KernelConfig::Kind::polynomial;
  } else {
    throw Error(ErrorKind::config, "unknown kernel kind '" + kind + "'");
  }
  k.sigma = j.value("sigma", k.sigma);
  k.degree = j.value("degree", k.degree);
  k.offset = j.value("offset", k.offset);
  k.reg_eps = j.value("reg_eps", k.reg_eps);
  k.check();
  return k;
}

}  // namespace koopman
