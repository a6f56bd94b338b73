#pragma once

#include <Eigen/Dense>
#include <string>

#include "peerdyn/flow.hpp"

namespace peerdyn {

struct DoublyStochasticCheck {
  double max_row_deviation = 0.0;
  double max_col_deviation = 0.0;
  double min_entry = 0.0;
  bool pass = false;
};

// pass iff row/column sums are within sum_tol of 1 and entries >= entry_floor.
DoublyStochasticCheck check_doubly_stochastic(const Eigen::MatrixXd& w,
                                              double sum_tol = 1e-10,
                                              double entry_floor = -1e-12);

// min over parameter coordinates of (max over agents of the norm of that
// Jacobian column). Zero means some parameter is invisible to every agent's
// data, the null-space overlap of the stability proof.
double minimality_check(const LinearizationAnchor& anchor);

// Max real part over the eigenvalues of A; symmetric fast path when A is
// numerically symmetric.
double spectral_abscissa(const Eigen::MatrixXd& a);

struct StabilityTolerances {
  double doubly_stochastic = 1e-10;
  double entry_floor = -1e-12;
  double minimality = 1e-10;
  double abscissa_stable = -1e-12;  // stable strictly below this
  double abscissa_marginal = 1e-10; // marginal up to this
};

enum class StabilityVerdict { Stable, Marginal, ViolatedPrecondition };

std::string to_string(StabilityVerdict v);

struct StabilityReport {
  Algorithm algorithm = Algorithm::Dgd;
  bool informational = false;  // true for ATC/CTA: the guarantee covers DGD only
  DoublyStochasticCheck doubly_stochastic;
  double minimality_value = 0.0;
  double abscissa = 0.0;
  StabilityVerdict verdict = StabilityVerdict::ViolatedPrecondition;

  std::string to_text() const;  // flat key = value block
};

StabilityReport bibo_report(Algorithm algorithm, const MixingMatrix& w,
                            const LinearizationAnchor& anchor, double step_size,
                            const StabilityTolerances& tol = {});

}  // namespace peerdyn
