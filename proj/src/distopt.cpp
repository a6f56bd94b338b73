#include "peerdyn/distopt.hpp"

#include <stdexcept>

namespace peerdyn {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "dgd") return Algorithm::Dgd;
  if (name == "atc") return Algorithm::Atc;
  if (name == "cta") return Algorithm::Cta;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected dgd|atc|cta)");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Dgd: return "dgd";
    case Algorithm::Atc: return "atc";
    case Algorithm::Cta: return "cta";
  }
  return "?";
}

StackedParams sync_init(const ModelSpec& spec, std::uint64_t seed, int num_agents) {
  if (num_agents < 1) throw std::invalid_argument("sync_init: need at least one agent");
  const ParamVector one = init_params(spec, seed);
  StackedParams stacked;
  stacked.num_agents = num_agents;
  stacked.params_per_agent = static_cast<int>(one.size());
  stacked.values.resize(static_cast<Eigen::Index>(num_agents) * one.size());
  for (int q = 0; q < num_agents; ++q) stacked.block(q) = one;
  return stacked;
}

namespace {

void check_shapes(const ModelSpec& spec, const StackedParams& theta, const AgentData& data) {
  data.validate();
  if (theta.num_agents != data.num_agents())
    throw std::invalid_argument("agent count mismatch between parameters and data");
  if (theta.params_per_agent != spec.param_count())
    throw std::invalid_argument("parameter block size does not match the model spec");
  if (theta.values.size() !=
      static_cast<Eigen::Index>(theta.num_agents) * theta.params_per_agent)
    throw std::invalid_argument("stacked parameter vector has inconsistent length");
}

Eigen::VectorXd stacked_residual(const ModelSpec& spec, const Eigen::VectorXd& theta_q,
                                 const LabeledDataset& local) {
  const Eigen::MatrixXd out = forward_batch(spec, theta_q, local.inputs);
  const Eigen::MatrixXd resid = out - local.targets;
  Eigen::VectorXd stacked(resid.size());
  Eigen::Index pos = 0;
  for (Eigen::Index i = 0; i < resid.rows(); ++i)
    for (Eigen::Index j = 0; j < resid.cols(); ++j) stacked(pos++) = resid(i, j);
  return stacked;
}

Eigen::VectorXd gradient_at(const ModelSpec& spec, const StackedParams& theta,
                            const AgentData& data) {
  const int q = theta.num_agents;
  const Eigen::Index p = theta.params_per_agent;
  const double inv_scale = 1.0 / (static_cast<double>(data.samples_per_agent()) *
                                  static_cast<double>(q));
  Eigen::VectorXd grad(theta.values.size());
  for (int a = 0; a < q; ++a) {
    const Eigen::MatrixXd jac = jacobian(spec, theta.block(a), data.agents[a].inputs);
    const Eigen::VectorXd resid = stacked_residual(spec, theta.block(a), data.agents[a]);
    grad.segment(static_cast<Eigen::Index>(a) * p, p) = (jac.transpose() * resid) * inv_scale;
  }
  return grad;
}

StackedParams with_values(const StackedParams& like, Eigen::VectorXd values) {
  return StackedParams{std::move(values), like.num_agents, like.params_per_agent};
}

}  // namespace

Eigen::VectorXd per_agent_losses(const ModelSpec& spec, const StackedParams& theta,
                                 const AgentData& data) {
  check_shapes(spec, theta, data);
  const int q = theta.num_agents;
  const double inv_2d = 1.0 / (2.0 * data.samples_per_agent());
  Eigen::VectorXd losses(q);
  for (int a = 0; a < q; ++a) {
    const Eigen::MatrixXd out = forward_batch(spec, theta.block(a), data.agents[a].inputs);
    losses(a) = (out - data.agents[a].targets).squaredNorm() * inv_2d;
  }
  return losses;
}

double global_mse_loss(const ModelSpec& spec, const StackedParams& theta,
                       const AgentData& data) {
  return per_agent_losses(spec, theta, data).mean();
}

Eigen::VectorXd stacked_gradient(const ModelSpec& spec, const StackedParams& theta,
                                 const AgentData& data) {
  check_shapes(spec, theta, data);
  return gradient_at(spec, theta, data);
}

StackedParams dgd_step(const ModelSpec& spec, const StackedParams& theta,
                       const AgentData& data, const MixingMatrix& w, double step_size) {
  check_shapes(spec, theta, data);
  if (step_size <= 0.0) throw std::invalid_argument("step size must be > 0");
  const Eigen::VectorXd mixed = lift(w, theta.params_per_agent).apply(theta.values);
  const Eigen::VectorXd grad = gradient_at(spec, theta, data);
  return with_values(theta, mixed - step_size * grad);
}

StackedParams atc_step(const ModelSpec& spec, const StackedParams& theta,
                       const AgentData& data, const MixingMatrix& w, double step_size) {
  check_shapes(spec, theta, data);
  if (step_size <= 0.0) throw std::invalid_argument("step size must be > 0");
  const Eigen::VectorXd grad = gradient_at(spec, theta, data);
  const Eigen::VectorXd adapted = theta.values - step_size * grad;
  return with_values(theta, lift(w, theta.params_per_agent).apply(adapted));
}

StackedParams cta_step(const ModelSpec& spec, const StackedParams& theta,
                       const AgentData& data, const MixingMatrix& w, double step_size) {
  check_shapes(spec, theta, data);
  if (step_size <= 0.0) throw std::invalid_argument("step size must be > 0");
  const StackedParams mixed =
      with_values(theta, lift(w, theta.params_per_agent).apply(theta.values));
  const Eigen::VectorXd grad = gradient_at(spec, mixed, data);
  return with_values(theta, mixed.values - step_size * grad);
}

TrajectoryRecord run_training(Algorithm algorithm, int steps, double step_size,
                              const ModelSpec& spec, const StackedParams& theta0,
                              const AgentData& data, const MixingMatrix& w,
                              bool record_params) {
  if (steps < 1) throw std::invalid_argument("run_training: need at least one step");
  check_shapes(spec, theta0, data);
  if (w.size() != theta0.num_agents)
    throw std::invalid_argument("mixing matrix size does not match the agent count");

  TrajectoryRecord record;
  record.algorithm = algorithm;
  record.step_size = step_size;
  record.losses.resize(steps + 1, theta0.num_agents);
  record.losses.row(0) = per_agent_losses(spec, theta0, data).transpose();
  if (record_params) record.parameters.push_back(theta0.values);

  StackedParams theta = theta0;
  for (int k = 1; k <= steps; ++k) {
    switch (algorithm) {
      case Algorithm::Dgd: theta = dgd_step(spec, theta, data, w, step_size); break;
      case Algorithm::Atc: theta = atc_step(spec, theta, data, w, step_size); break;
      case Algorithm::Cta: theta = cta_step(spec, theta, data, w, step_size); break;
    }
    if (!theta.values.allFinite())
      throw std::runtime_error("training diverged: non-finite parameters at step " +
                               std::to_string(k));
    record.losses.row(k) = per_agent_losses(spec, theta, data).transpose();
    if (record_params) record.parameters.push_back(theta.values);
  }
  return record;
}

}  // namespace peerdyn
