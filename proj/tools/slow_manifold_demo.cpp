// Fits EDMD with quadratic monomials to the slow-manifold system and prints
// the recovered continuous-time spectrum and a prediction error.

#include <cmath>
#include <iostream>
#include <numbers>

#include "koopman/koopman.hpp"

int main() {
  using namespace koopman;
  const TrajectoryDataset data = bench::slow_manifold_grid(10, 2500, 0.02);
  RegressorConfig reg;
  reg.kind = RegressorKind::edmd;
  const KoopmanModel model = fit(make_polynomial(2, 2), reg, data);

  std::cout << "continuous eigenvalues:\n";
  for (Index j = 0; j < model.eigen().size(); ++j)
    std::cout << "  " << model.eigen().mus(j).real() << " " << model.eigen().mus(j).imag()
              << "i\n";

  const auto spec = bench::system("slow_manifold");
  double worst = 0.0;
  for (int k = 0; k < 8; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 8.0;
    VectorXd x0(2);
    x0 << std::cos(th), std::sin(th);
    const MatrixXd truth = bench::integrate_rk4(spec, x0, 0.02, 2499);
    const MatrixXd pred = simulate(model, x0, 2499);
    worst = std::max(worst, std::sqrt((truth - pred).squaredNorm() / truth.size()));
  }
  std::cout << "worst trajectory RMSE on the unit circle: " << worst << "\n";
}
