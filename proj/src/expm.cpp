#include "peerdyn/expm.hpp"

#include <cmath>
#include <stdexcept>

namespace peerdyn {

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() < 1)
    throw std::invalid_argument("expm: matrix must be square and nonempty");
  if (!a.allFinite()) throw std::invalid_argument("expm: matrix has non-finite entries");

  // Degree-13 Pade coefficients.
  static const double b[14] = {64764752532480000.0,
                               32382376266240000.0,
                               7771770303897600.0,
                               1187353796428800.0,
                               129060195264000.0,
                               10559470521600.0,
                               670442572800.0,
                               33522128640.0,
                               1323241920.0,
                               40840800.0,
                               960960.0,
                               16380.0,
                               182.0,
                               1.0};
  // Largest 1-norm handled by the degree-13 approximant without scaling.
  constexpr double theta13 = 5.371920351148152;

  const Eigen::Index n = a.rows();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13)
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));

  const Eigen::MatrixXd as = a * std::ldexp(1.0, -squarings);
  const Eigen::MatrixXd a2 = as * as;
  const Eigen::MatrixXd a4 = a2 * a2;
  const Eigen::MatrixXd a6 = a4 * a2;

  Eigen::MatrixXd u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
  u_inner = a6 * u_inner;
  u_inner.noalias() += b[7] * a6 + b[5] * a4 + b[3] * a2;
  u_inner.diagonal().array() += b[1];
  const Eigen::MatrixXd u = as * u_inner;

  Eigen::MatrixXd v = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v = a6 * v;
  v.noalias() += b[6] * a6 + b[4] * a4 + b[2] * a2;
  v.diagonal().array() += b[0];

  const Eigen::MatrixXd numer = v + u;
  const Eigen::MatrixXd denom = v - u;
  Eigen::MatrixXd r = denom.partialPivLu().solve(numer);
  for (int s = 0; s < squarings; ++s) r = r * r;
  if ((n > 0) && !r.allFinite())
    throw std::runtime_error("expm: result is non-finite (input too badly scaled?)");
  return r;
}

}  // namespace peerdyn
