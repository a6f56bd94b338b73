#include "peerdyn/flow.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "peerdyn/expm.hpp"

namespace peerdyn {

Eigen::VectorXd LinearizationAnchor::linearized_outputs(int agent,
                                                        const Eigen::VectorXd& theta_q) const {
  const Eigen::Index rows = rows_per_agent;
  const Eigen::Index p = params_per_agent;
  Eigen::VectorXd out = outputs0.segment(static_cast<Eigen::Index>(agent) * rows, rows);
  out.noalias() += jacobians[agent] *
                   (theta_q - theta0.segment(static_cast<Eigen::Index>(agent) * p, p));
  return out;
}

LinearizationAnchor build_anchor(const ModelSpec& spec, const StackedParams& theta0,
                                 const AgentData& data) {
  data.validate();
  if (theta0.num_agents != data.num_agents())
    throw std::invalid_argument("build_anchor: agent count mismatch");
  if (theta0.params_per_agent != spec.param_count())
    throw std::invalid_argument("build_anchor: parameter block size mismatch");

  LinearizationAnchor anchor;
  anchor.num_agents = theta0.num_agents;
  anchor.params_per_agent = theta0.params_per_agent;
  anchor.samples_per_agent = data.samples_per_agent();
  anchor.target_dim = data.target_dim();
  anchor.rows_per_agent = anchor.samples_per_agent * anchor.target_dim;
  anchor.theta0 = theta0.values;
  anchor.targets = stack_targets(data);
  anchor.outputs0.resize(static_cast<Eigen::Index>(anchor.num_agents) * anchor.rows_per_agent);
  anchor.jacobians.reserve(anchor.num_agents);
  for (int q = 0; q < anchor.num_agents; ++q) {
    anchor.jacobians.push_back(jacobian(spec, theta0.block(q), data.agents[q].inputs));
    const Eigen::MatrixXd out = forward_batch(spec, theta0.block(q), data.agents[q].inputs);
    Eigen::Index pos = static_cast<Eigen::Index>(q) * anchor.rows_per_agent;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j) anchor.outputs0(pos++) = out(i, j);
  }
  return anchor;
}

LinearFlowSystem build_system(Algorithm algorithm, LinearizationAnchor anchor,
                              const MixingMatrix& w, double step_size) {
  if (w.size() != anchor.num_agents)
    throw std::invalid_argument("build_system: mixing matrix size mismatch");
  if (step_size <= 0.0) throw std::invalid_argument("build_system: step size must be > 0");
  LinearFlowSystem system;
  system.algorithm = algorithm;
  system.anchor = std::move(anchor);
  system.mixing = w;
  system.step_size = step_size;
  system.samples_per_agent = system.anchor.samples_per_agent;
  return system;
}

namespace {

// Per-agent Gram blocks Psi_q = J_q^T J_q.
std::vector<Eigen::MatrixXd> gram_blocks(const LinearizationAnchor& anchor) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(anchor.num_agents);
  for (const auto& j : anchor.jacobians)
    blocks.push_back(j.transpose() * j);
  return blocks;
}

// J_q^T (f0_q - y_q) - Psi_q theta0_q for every agent, stacked.
Eigen::VectorXd forcing_base(const LinearizationAnchor& anchor,
                             const std::vector<Eigen::MatrixXd>& gram) {
  const Eigen::Index p = anchor.params_per_agent;
  const Eigen::Index rows = anchor.rows_per_agent;
  Eigen::VectorXd base(static_cast<Eigen::Index>(anchor.num_agents) * p);
  for (int q = 0; q < anchor.num_agents; ++q) {
    const auto resid0 = anchor.outputs0.segment(q * rows, rows) -
                        anchor.targets.segment(q * rows, rows);
    base.segment(q * p, p) = anchor.jacobians[q].transpose() * resid0;
    base.segment(q * p, p).noalias() -= gram[q] * anchor.theta0.segment(q * p, p);
  }
  return base;
}

}  // namespace

Eigen::MatrixXd LinearFlowSystem::state_matrix() const {
  const int q = anchor.num_agents;
  const Eigen::Index p = anchor.params_per_agent;
  const Eigen::Index n = dim();
  const double c = coeff();
  const Eigen::MatrixXd& w = mixing.weights;
  const std::vector<Eigen::MatrixXd> gram = gram_blocks(anchor);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) {
      const double wv = w(i, j) - (i == j ? 1.0 : 0.0);
      if (wv != 0.0)
        a.block(i * p, j * p, p, p).diagonal().array() += wv;
    }
  switch (algorithm) {
    case Algorithm::Dgd:
      for (int i = 0; i < q; ++i) a.block(i * p, i * p, p, p).noalias() -= c * gram[i];
      break;
    case Algorithm::Atc:
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
          if (w(i, j) == 0.0) continue;
          a.block(i * p, j * p, p, p).noalias() -= (c * w(i, j)) * gram[j];
        }
      break;
    case Algorithm::Cta:
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
          if (w(i, j) == 0.0) continue;
          a.block(i * p, j * p, p, p).noalias() -= (c * w(i, j)) * gram[i];
        }
      break;
  }
  return a;
}

Eigen::VectorXd LinearFlowSystem::forcing() const {
  const Eigen::VectorXd base = forcing_base(anchor, gram_blocks(anchor));
  const double c = coeff();
  if (algorithm == Algorithm::Atc)
    return -c * lift(mixing, anchor.params_per_agent).apply(base);
  return -c * base;
}

Eigen::VectorXd LinearFlowSystem::rhs(const Eigen::VectorXd& state) const {
  if (state.size() != dim())
    throw std::invalid_argument("rhs: state length does not match the system dimension");
  const int q = anchor.num_agents;
  const Eigen::Index p = anchor.params_per_agent;
  const Eigen::Index rows = anchor.rows_per_agent;
  const double c = coeff();

  Eigen::VectorXd out = lift_shifted(mixing, static_cast<int>(p)).apply(state);

  // Gradient of the linearized MSE objective at `at`, times 1/(DQ).
  const auto add_gradient_term = [&](const Eigen::VectorXd& at, Eigen::VectorXd& dst,
                                     bool mix_after) {
    Eigen::VectorXd grad(static_cast<Eigen::Index>(q) * p);
    for (int agent = 0; agent < q; ++agent) {
      Eigen::VectorXd resid = anchor.linearized_outputs(agent, at.segment(agent * p, p));
      resid -= anchor.targets.segment(agent * rows, rows);
      grad.segment(agent * p, p) = anchor.jacobians[agent].transpose() * resid;
    }
    if (mix_after) grad = lift(mixing, static_cast<int>(p)).apply(grad);
    dst.noalias() -= c * grad;
  };

  switch (algorithm) {
    case Algorithm::Dgd:
      add_gradient_term(state, out, false);
      break;
    case Algorithm::Atc:
      add_gradient_term(state, out, true);
      break;
    case Algorithm::Cta: {
      const Eigen::VectorXd mixed = lift(mixing, static_cast<int>(p)).apply(state);
      add_gradient_term(mixed, out, false);
      break;
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> solve_lti(const Eigen::MatrixXd& a, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& x0,
                                       const std::vector<double>& times) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || u.size() != n || x0.size() != n)
    throw std::invalid_argument("solve_lti: inconsistent dimensions");
  if (times.empty()) throw std::invalid_argument("solve_lti: empty time grid");

  // exp(t [[A, u], [0, 0]]) maps [x; 1] to [x(t); 1], valid for singular A.
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a;
  aug.topRightCorner(n, 1) = u;

  Eigen::VectorXd state(n + 1);
  state << x0, 1.0;

  std::vector<Eigen::VectorXd> out;
  out.reserve(times.size());
  std::map<double, Eigen::MatrixXd> step_cache;
  double prev = 0.0;
  for (double t : times) {
    if (!(t >= prev) || t < 0.0)
      throw std::invalid_argument("solve_lti: times must be nonnegative and nondecreasing");
    const double gap = t - prev;
    if (gap > 0.0) {
      auto it = step_cache.find(gap);
      if (it == step_cache.end())
        it = step_cache.emplace(gap, expm(gap * aug)).first;
      state = it->second * state;
    }
    out.push_back(state.head(n));
    prev = t;
  }
  return out;
}

std::vector<Eigen::VectorXd> solve_closed_form(const LinearFlowSystem& system,
                                               const std::vector<double>& times,
                                               Eigen::Index dense_cap) {
  if (system.dim() > dense_cap)
    throw std::runtime_error(
        "solve_closed_form: state dimension " + std::to_string(system.dim()) +
        " exceeds the dense cap " + std::to_string(dense_cap) +
        "; use integrate_system_rk4 instead");
  return solve_lti(system.state_matrix(), system.forcing(), system.anchor.theta0, times);
}

std::vector<Eigen::VectorXd> integrate_rk4(
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& rhs,
    const Eigen::VectorXd& initial, const std::vector<double>& times, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("integrate_rk4: dt must be > 0");
  if (times.empty()) throw std::invalid_argument("integrate_rk4: empty time grid");

  Eigen::VectorXd x = initial;
  double t = 0.0;
  long step_index = 0;
  std::vector<Eigen::VectorXd> out;
  out.reserve(times.size());
  for (double target : times) {
    if (!(target >= t))
      throw std::invalid_argument("integrate_rk4: times must be nondecreasing from 0");
    const double span = target - t;
    if (span > 0.0) {
      const long nsub = std::max<long>(1, static_cast<long>(std::ceil(span / dt - 1e-12)));
      const double h = span / static_cast<double>(nsub);
      for (long s = 0; s < nsub; ++s) {
        const Eigen::VectorXd k1 = rhs(t, x);
        const Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + (0.5 * h) * k1);
        const Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + (0.5 * h) * k2);
        const Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        ++step_index;
        if (!x.allFinite())
          throw std::runtime_error("integrate_rk4: non-finite state at step " +
                                   std::to_string(step_index));
      }
      t = target;  // avoid drift from repeated accumulation
    }
    out.push_back(x);
  }
  return out;
}

std::vector<Eigen::VectorXd> integrate_system_rk4(const LinearFlowSystem& system,
                                                  const std::vector<double>& times, double dt) {
  return integrate_rk4(
      [&system](double, const Eigen::VectorXd& x) { return system.rhs(x); },
      system.anchor.theta0, times, dt);
}

Eigen::VectorXd flow_rhs(const LinearFlowSystem& system, FlowLoss loss,
                         const Eigen::VectorXd& state) {
  if (loss == FlowLoss::Mse) return system.rhs(state);

  const LinearizationAnchor& anchor = system.anchor;
  const int q = anchor.num_agents;
  const Eigen::Index p = anchor.params_per_agent;
  const Eigen::Index rows = anchor.rows_per_agent;
  const int target_dim = anchor.target_dim;
  const double c = system.coeff();

  // d loss / d f for the cross-entropy pairing, evaluated on linearized
  // outputs: sigmoid(f) - y when M=1, softmax(f) - y blockwise otherwise.
  const auto loss_grad = [&](Eigen::VectorXd f, const Eigen::VectorXd& y) {
    if (target_dim == 1) {
      for (Eigen::Index i = 0; i < f.size(); ++i)
        f(i) = 1.0 / (1.0 + std::exp(-f(i))) - y(i);
      return f;
    }
    for (Eigen::Index i = 0; i < f.size(); i += target_dim) {
      auto block = f.segment(i, target_dim);
      const double zmax = block.maxCoeff();
      Eigen::VectorXd ex = (block.array() - zmax).exp();
      block = ex / ex.sum() - y.segment(i, target_dim);
    }
    return f;
  };

  Eigen::VectorXd out = lift_shifted(system.mixing, static_cast<int>(p)).apply(state);
  const Eigen::VectorXd at =
      system.algorithm == Algorithm::Cta
          ? Eigen::VectorXd(lift(system.mixing, static_cast<int>(p)).apply(state))
          : state;
  Eigen::VectorXd grad(static_cast<Eigen::Index>(q) * p);
  for (int agent = 0; agent < q; ++agent) {
    const Eigen::VectorXd fbar = anchor.linearized_outputs(agent, at.segment(agent * p, p));
    const Eigen::VectorXd dl = loss_grad(fbar, anchor.targets.segment(agent * rows, rows));
    grad.segment(agent * p, p) = anchor.jacobians[agent].transpose() * dl;
  }
  if (system.algorithm == Algorithm::Atc)
    grad = lift(system.mixing, static_cast<int>(p)).apply(grad);
  out.noalias() -= c * grad;
  return out;
}

std::vector<Eigen::VectorXd> integrate_flow(const LinearFlowSystem& system, FlowLoss loss,
                                            const std::vector<double>& times, double dt) {
  if (loss == FlowLoss::Mse) return integrate_system_rk4(system, times, dt);
  return integrate_rk4(
      [&system, loss](double, const Eigen::VectorXd& x) {
        return flow_rhs(system, loss, x);
      },
      system.anchor.theta0, times, dt);
}

PredictedLosses predict_losses(const LinearizationAnchor& anchor, const ModelSpec& spec,
                               const AgentData& data,
                               const std::vector<Eigen::VectorXd>& trajectory) {
  data.validate();
  const int q = anchor.num_agents;
  const Eigen::Index p = anchor.params_per_agent;
  const Eigen::Index rows = anchor.rows_per_agent;
  const double inv_2d = 1.0 / (2.0 * data.samples_per_agent());

  PredictedLosses out;
  out.model.resize(static_cast<Eigen::Index>(trajectory.size()), q);
  out.linearized.resize(static_cast<Eigen::Index>(trajectory.size()), q);
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const Eigen::VectorXd& state = trajectory[k];
    if (state.size() != static_cast<Eigen::Index>(q) * p)
      throw std::invalid_argument("predict_losses: state length mismatch");
    for (int agent = 0; agent < q; ++agent) {
      const Eigen::VectorXd theta_q = state.segment(agent * p, p);
      const Eigen::MatrixXd pred = forward_batch(spec, theta_q, data.agents[agent].inputs);
      out.model(k, agent) = (pred - data.agents[agent].targets).squaredNorm() * inv_2d;
      const Eigen::VectorXd fbar = anchor.linearized_outputs(agent, theta_q);
      out.linearized(k, agent) =
          (fbar - anchor.targets.segment(agent * rows, rows)).squaredNorm() * inv_2d;
    }
  }
  return out;
}

}  // namespace peerdyn
