#include "peerdyn/stability.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace peerdyn {

DoublyStochasticCheck check_doubly_stochastic(const Eigen::MatrixXd& w, double sum_tol,
                                              double entry_floor) {
  if (w.rows() != w.cols() || w.rows() < 1)
    throw std::invalid_argument("check_doubly_stochastic: matrix must be square");
  DoublyStochasticCheck check;
  check.max_row_deviation = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  check.max_col_deviation = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
  check.min_entry = w.minCoeff();
  check.pass = check.max_row_deviation < sum_tol && check.max_col_deviation < sum_tol &&
               check.min_entry >= entry_floor;
  return check;
}

double minimality_check(const LinearizationAnchor& anchor) {
  if (anchor.jacobians.empty()) throw std::invalid_argument("minimality_check: empty anchor");
  const Eigen::Index p = anchor.params_per_agent;
  double smallest = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < p; ++j) {
    double best_agent = 0.0;
    for (const auto& jac : anchor.jacobians)
      best_agent = std::max(best_agent, jac.col(j).norm());
    smallest = std::min(smallest, best_agent);
  }
  return smallest;
}

double spectral_abscissa(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() < 1)
    throw std::invalid_argument("spectral_abscissa: matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym <= 1e-14 * scale) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("spectral_abscissa: symmetric eigensolver failed");
    return es.eigenvalues().maxCoeff();
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_abscissa: eigensolver failed to converge");
  return es.eigenvalues().real().maxCoeff();
}

std::string to_string(StabilityVerdict v) {
  switch (v) {
    case StabilityVerdict::Stable: return "stable";
    case StabilityVerdict::Marginal: return "marginal";
    case StabilityVerdict::ViolatedPrecondition: return "violated-precondition";
  }
  return "?";
}

std::string StabilityReport::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "algorithm = " << to_string(algorithm) << "\n";
  out << "informational = " << (informational ? "true" : "false") << "\n";
  out << "doubly_stochastic = " << (doubly_stochastic.pass ? "pass" : "fail") << "\n";
  out << "doubly_stochastic_max_row_deviation = " << doubly_stochastic.max_row_deviation
      << "\n";
  out << "doubly_stochastic_max_col_deviation = " << doubly_stochastic.max_col_deviation
      << "\n";
  out << "doubly_stochastic_min_entry = " << doubly_stochastic.min_entry << "\n";
  out << "minimality_value = " << minimality_value << "\n";
  out << "spectral_abscissa = " << abscissa << "\n";
  out << "verdict = " << to_string(verdict) << "\n";
  return out.str();
}

StabilityReport bibo_report(Algorithm algorithm, const MixingMatrix& w,
                            const LinearizationAnchor& anchor, double step_size,
                            const StabilityTolerances& tol) {
  StabilityReport report;
  report.algorithm = algorithm;
  report.informational = algorithm != Algorithm::Dgd;
  report.doubly_stochastic =
      check_doubly_stochastic(w.weights, tol.doubly_stochastic, tol.entry_floor);
  report.minimality_value = minimality_check(anchor);

  LinearFlowSystem system = build_system(algorithm, anchor, w, step_size);
  report.abscissa = spectral_abscissa(system.state_matrix());

  if (!report.doubly_stochastic.pass || report.minimality_value <= tol.minimality)
    report.verdict = StabilityVerdict::ViolatedPrecondition;
  else if (report.abscissa < tol.abscissa_stable)
    report.verdict = StabilityVerdict::Stable;
  else if (report.abscissa <= tol.abscissa_marginal)
    report.verdict = StabilityVerdict::Marginal;
  else
    report.verdict = StabilityVerdict::ViolatedPrecondition;
  return report;
}

}  // namespace peerdyn
