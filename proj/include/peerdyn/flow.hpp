#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "peerdyn/distopt.hpp"

namespace peerdyn {

// Jacobians, outputs, and labels at the initial stacked parameters. The
// stacked Jacobian is block diagonal; only the per-agent blocks are stored.
struct LinearizationAnchor {
  std::vector<Eigen::MatrixXd> jacobians;  // Q blocks, each (M*D) x P
  Eigen::VectorXd outputs0;                // f_0 in R^{QMD}
  Eigen::VectorXd targets;                 // y in R^{QMD}
  Eigen::VectorXd theta0;                  // R^{QP}

  int num_agents = 0;
  int params_per_agent = 0;
  int samples_per_agent = 0;  // D
  int target_dim = 0;         // M
  int rows_per_agent = 0;     // M*D

  // f_0 + J_0 (theta - theta_0) for one agent block.
  Eigen::VectorXd linearized_outputs(int agent, const Eigen::VectorXd& theta_q) const;
};

LinearizationAnchor build_anchor(const ModelSpec& spec, const StackedParams& theta0,
                                 const AgentData& data);

// Time-invariant system d(theta)/dt = A theta + u for the linearized MSE
// flow of the chosen algorithm. A and u can be materialized densely or
// applied matrix-free.
struct LinearFlowSystem {
  Algorithm algorithm = Algorithm::Dgd;
  LinearizationAnchor anchor;
  MixingMatrix mixing;
  double step_size = 0.0;  // eta, already folded into A and u
  int samples_per_agent = 0;

  Eigen::Index dim() const {
    return static_cast<Eigen::Index>(anchor.num_agents) * anchor.params_per_agent;
  }
  double coeff() const {
    return step_size / (static_cast<double>(samples_per_agent) * anchor.num_agents);
  }

  Eigen::MatrixXd state_matrix() const;  // A
  Eigen::VectorXd forcing() const;       // u
  Eigen::VectorXd rhs(const Eigen::VectorXd& state) const;  // A*state + u, matrix-free
};

LinearFlowSystem build_system(Algorithm algorithm, LinearizationAnchor anchor,
                              const MixingMatrix& w, double step_size);

// States of dx/dt = A x + u at the given nondecreasing times (t >= 0),
// computed through the augmented matrix exp(t [[A, u], [0, 0]]) so singular A
// needs no special casing.
std::vector<Eigen::VectorXd> solve_lti(const Eigen::MatrixXd& a, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& x0,
                                       const std::vector<double>& times);

// Closed-form trajectory of the linearized flow. Refuses to materialize a
// state matrix larger than dense_cap (use integrate_system_rk4 instead).
std::vector<Eigen::VectorXd> solve_closed_form(const LinearFlowSystem& system,
                                               const std::vector<double>& times,
                                               Eigen::Index dense_cap = 10000);

// Classical fixed-step RK4. Sub-steps between consecutive grid times with
// step <= dt; states are reported on the grid.
std::vector<Eigen::VectorXd> integrate_rk4(
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& rhs,
    const Eigen::VectorXd& initial, const std::vector<double>& times, double dt);

// Matrix-free RK4 on the linearized MSE flow.
std::vector<Eigen::VectorXd> integrate_system_rk4(const LinearFlowSystem& system,
                                                  const std::vector<double>& times, double dt);

// Gradient flow with the linearized network outputs under a non-MSE loss,
// integrated numerically. M=1 targets in {0,1} use the sigmoid/binary
// cross-entropy pairing; M>1 uses softmax with one-hot targets.
enum class FlowLoss { Mse, CrossEntropy };

// Right-hand side of the flow for the chosen loss at an arbitrary state.
Eigen::VectorXd flow_rhs(const LinearFlowSystem& system, FlowLoss loss,
                         const Eigen::VectorXd& state);

std::vector<Eigen::VectorXd> integrate_flow(const LinearFlowSystem& system, FlowLoss loss,
                                            const std::vector<double>& times, double dt);

// Per-agent MSE loss curves along a parameter trajectory: `model` substitutes
// the parameters into the true network, `linearized` evaluates the
// first-order expansion around theta_0.
struct PredictedLosses {
  Eigen::MatrixXd model;       // T x Q
  Eigen::MatrixXd linearized;  // T x Q
};

PredictedLosses predict_losses(const LinearizationAnchor& anchor, const ModelSpec& spec,
                               const AgentData& data,
                               const std::vector<Eigen::VectorXd>& trajectory);

}  // namespace peerdyn
