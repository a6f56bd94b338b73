#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "peerdyn/data.hpp"
#include "peerdyn/mixing.hpp"
#include "peerdyn/model.hpp"

namespace peerdyn {

enum class Algorithm { Dgd, Atc, Cta };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm a);

// Concatenated per-agent parameter estimates, length Q*P.
struct StackedParams {
  Eigen::VectorXd values;
  int num_agents = 0;
  int params_per_agent = 0;

  auto block(int q) { return values.segment(static_cast<Eigen::Index>(q) * params_per_agent,
                                            params_per_agent); }
  auto block(int q) const {
    return values.segment(static_cast<Eigen::Index>(q) * params_per_agent, params_per_agent);
  }
};

// One parameter draw replicated to every agent (identical initialization).
StackedParams sync_init(const ModelSpec& spec, std::uint64_t seed, int num_agents);

// loss_q = (1/2D) sum_i |f(x_qi; theta_q) - y_qi|^2, each agent at its own
// parameters.
Eigen::VectorXd per_agent_losses(const ModelSpec& spec, const StackedParams& theta,
                                 const AgentData& data);

// Average of the per-agent losses (the plotted global objective).
double global_mse_loss(const ModelSpec& spec, const StackedParams& theta,
                       const AgentData& data);

// Gradient of the global objective: block q = (1/(DQ)) J_q^T (f_q - y_q).
Eigen::VectorXd stacked_gradient(const ModelSpec& spec, const StackedParams& theta,
                                 const AgentData& data);

// One synchronous round. DGD mixes then subtracts the pre-mix gradient, ATC
// takes a local gradient step then mixes, CTA evaluates the gradient at the
// mixed parameters.
StackedParams dgd_step(const ModelSpec& spec, const StackedParams& theta,
                       const AgentData& data, const MixingMatrix& w, double step_size);
StackedParams atc_step(const ModelSpec& spec, const StackedParams& theta,
                       const AgentData& data, const MixingMatrix& w, double step_size);
StackedParams cta_step(const ModelSpec& spec, const StackedParams& theta,
                       const AgentData& data, const MixingMatrix& w, double step_size);

struct TrajectoryRecord {
  Algorithm algorithm = Algorithm::Dgd;
  double step_size = 0.0;
  Eigen::MatrixXd losses;                    // (steps+1) x Q, row k = losses after k steps
  std::vector<Eigen::VectorXd> parameters;   // per recorded step, empty unless requested
};

// Applies the chosen update `steps` times, recording per-agent losses at
// every step including k=0. Aborts with a diagnostic if the iterates stop
// being finite.
TrajectoryRecord run_training(Algorithm algorithm, int steps, double step_size,
                              const ModelSpec& spec, const StackedParams& theta0,
                              const AgentData& data, const MixingMatrix& w,
                              bool record_params = false);

}  // namespace peerdyn
