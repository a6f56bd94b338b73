#pragma once

#include <Eigen/Dense>

namespace peerdyn {

// Matrix exponential by scaling-and-squaring with a degree-13 Pade
// approximant and 1-norm-based scaling.
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

}  // namespace peerdyn
