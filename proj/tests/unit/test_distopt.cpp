#include <doctest.h>

#include "test_util.hpp"

#include "peerdyn/distopt.hpp"
#include "peerdyn/rng.hpp"

using namespace peerdyn;

namespace {

AgentData blob_agents(int num_agents, int per_agent, int dim, std::uint64_t seed) {
  return split_iid(gaussian_blobs(num_agents * per_agent, dim, seed), num_agents, per_agent,
                   seed + 1);
}

// Data an affine model fits exactly: targets generated by a fixed (w, b).
AgentData realizable_agents(int num_agents, int per_agent, int dim, std::uint64_t seed,
                            const ModelSpec& spec, const ParamVector& truth) {
  AgentData data = blob_agents(num_agents, per_agent, dim, seed);
  for (auto& agent : data.agents)
    agent.targets = forward_batch(spec, truth, agent.inputs);
  return data;
}

}  // namespace

TEST_CASE("sync_init replicates one draw") {
  const ModelSpec spec = make_mlp({3, 5, 1});
  const StackedParams theta = sync_init(spec, 21, 3);
  CHECK(theta.num_agents == 3);
  CHECK(theta.params_per_agent == spec.param_count());
  CHECK(testutil::bitwise_equal(theta.block(0), theta.block(1)));
  CHECK(testutil::bitwise_equal(theta.block(0), theta.block(2)));
  CHECK((theta.block(0) - theta.block(2)).norm() == 0.0);  // zero consensus residual
  CHECK(!testutil::bitwise_equal(sync_init(spec, 22, 3).values, theta.values));
  CHECK(testutil::bitwise_equal(theta.block(1), init_params(spec, 21)));
}

TEST_CASE("per-agent and global MSE losses") {
  const ModelSpec spec = make_affine(2);

  // Single sample per agent; agent losses (b - y)^2 / 2 with w = 0.
  AgentData data;
  data.agents.resize(2);
  for (auto& agent : data.agents) {
    agent.inputs.resize(1, 2);
    agent.inputs << 0.3, -0.7;
    agent.targets.resize(1, 1);
  }
  data.agents[0].targets << std::sqrt(2.0);  // loss 1
  data.agents[1].targets << std::sqrt(6.0);  // loss 3

  StackedParams theta{Eigen::VectorXd::Zero(6), 2, 3};
  const Eigen::VectorXd losses = per_agent_losses(spec, theta, data);
  CHECK(losses(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(losses(1) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(global_mse_loss(spec, theta, data) == doctest::Approx(2.0).epsilon(1e-14));

  // w=0, b=0, y=1: loss 1/2.
  data.agents[0].targets << 1.0;
  CHECK(per_agent_losses(spec, theta, data)(0) == doctest::Approx(0.5).epsilon(1e-14));

  // Perfect fit.
  const ParamVector truth = init_params(spec, 8);
  const AgentData fit = realizable_agents(2, 4, 2, 5, spec, truth);
  StackedParams at_truth{Eigen::VectorXd(6), 2, 3};
  at_truth.block(0) = truth;
  at_truth.block(1) = truth;
  CHECK(per_agent_losses(spec, at_truth, fit).maxCoeff() < 1e-28);
}

TEST_CASE("stacked gradient against finite differences of the global loss") {
  const ModelSpec spec = make_affine(3);
  const AgentData data = blob_agents(3, 5, 3, 17);
  StackedParams theta{Eigen::VectorXd(12), 3, 4};
  Rng rng(2);
  for (Eigen::Index i = 0; i < theta.values.size(); ++i) theta.values(i) = rng.normal();

  const Eigen::VectorXd grad = stacked_gradient(spec, theta, data);
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < theta.values.size(); ++j) {
    StackedParams hi = theta, lo = theta;
    hi.values(j) += h;
    lo.values(j) -= h;
    const double fd =
        (global_mse_loss(spec, hi, data) - global_mse_loss(spec, lo, data)) / (2.0 * h);
    CHECK(grad(j) == doctest::Approx(fd).epsilon(1e-6));
  }

  // Perfect fit: zero gradient.
  const ParamVector truth = init_params(spec, 4);
  const AgentData fit = realizable_agents(3, 5, 3, 6, spec, truth);
  StackedParams at_truth{Eigen::VectorXd(12), 3, 4};
  for (int q = 0; q < 3; ++q) at_truth.block(q) = truth;
  CHECK(stacked_gradient(spec, at_truth, fit).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("gradient scaling: Q=1 reduces to (1/D) J^T r") {
  const ModelSpec spec = make_affine(2);
  const AgentData data = blob_agents(1, 6, 2, 33);
  StackedParams theta{init_params(spec, 3), 1, 3};
  const Eigen::VectorXd grad = stacked_gradient(spec, theta, data);

  const Eigen::MatrixXd jac = jacobian(spec, theta.block(0), data.agents[0].inputs);
  const Eigen::VectorXd resid =
      forward_batch(spec, theta.block(0), data.agents[0].inputs) - data.agents[0].targets;
  const Eigen::VectorXd expected = (jac.transpose() * resid) / 6.0;
  CHECK(testutil::max_abs_diff(grad, expected) < 1e-15);
}

TEST_CASE("update rules coincide for W = I and decouple the agents") {
  const ModelSpec spec = make_mlp({2, 4, 1});
  const AgentData data = blob_agents(3, 4, 2, 9);
  const StackedParams theta0 = sync_init(spec, 31, 3);
  const MixingMatrix eye = MixingMatrix::from_matrix(Eigen::MatrixXd::Identity(3, 3));
  const double eta = 0.05;

  const StackedParams a = dgd_step(spec, theta0, data, eye, eta);
  const StackedParams b = atc_step(spec, theta0, data, eye, eta);
  const StackedParams c = cta_step(spec, theta0, data, eye, eta);
  CHECK(testutil::bitwise_equal(a.values, b.values));
  CHECK(testutil::bitwise_equal(a.values, c.values));

  // Each block equals an independent gradient step with the 1/(DQ) scaling.
  const double inv_scale = 1.0 / (static_cast<double>(data.samples_per_agent()) * 3.0);
  for (int q = 0; q < 3; ++q) {
    const Eigen::MatrixXd jac = jacobian(spec, theta0.block(q), data.agents[q].inputs);
    Eigen::MatrixXd out = forward_batch(spec, theta0.block(q), data.agents[q].inputs);
    const Eigen::VectorXd resid = out - data.agents[q].targets;
    const Eigen::VectorXd gq = (jac.transpose() * resid) * inv_scale;
    const Eigen::VectorXd expected = theta0.block(q) - eta * gq;
    CHECK(testutil::bitwise_equal(a.block(q), expected));
  }
}

TEST_CASE("zero gradients reduce every rule to pure mixing") {
  const ModelSpec spec = make_affine(2);
  const ParamVector truth = init_params(spec, 12);
  const AgentData fit = realizable_agents(4, 3, 2, 13, spec, truth);
  const MixingMatrix w = metropolis_hastings(build_topology(TopologyKind::Cycle, 4));

  StackedParams theta{Eigen::VectorXd(12), 4, 3};
  for (int q = 0; q < 4; ++q) theta.block(q) = truth;

  const Eigen::VectorXd mixed = lift(w, 3).apply(theta.values);
  const StackedParams next = dgd_step(spec, theta, fit, w, 0.1);
  CHECK(testutil::max_abs_diff(next.values, mixed) < 1e-15);

  // Doubly stochastic mixing preserves the per-coordinate agent average,
  // which is the whole update when gradients vanish.
  Rng rng(55);
  Eigen::VectorXd random_stack(12);
  for (Eigen::Index i = 0; i < 12; ++i) random_stack(i) = rng.normal();
  const Eigen::VectorXd mixed_random = lift(w, 3).apply(random_stack);
  Eigen::VectorXd before = Eigen::VectorXd::Zero(3), after = Eigen::VectorXd::Zero(3);
  for (int q = 0; q < 4; ++q) {
    before += random_stack.segment(q * 3, 3);
    after += mixed_random.segment(q * 3, 3);
  }
  CHECK(testutil::max_abs_diff(before / 4.0, after / 4.0) < 1e-12);
}

TEST_CASE("identical parameters and data make mixing a no-op (centralized GD)") {
  const ModelSpec spec = make_affine(3);
  const LabeledDataset shared = gaussian_blobs(10, 3, 40);
  AgentData data;
  data.agents = {shared, shared, shared};
  const StackedParams theta0 = sync_init(spec, 50, 3);
  const MixingMatrix w = metropolis_hastings(build_topology(TopologyKind::Complete, 3));
  const double eta = 0.01;

  const StackedParams next = dgd_step(spec, theta0, data, w, eta);
  // Hand-expanded: theta - (eta/Q) * (1/D) J^T r per agent.
  const Eigen::MatrixXd jac = jacobian(spec, theta0.block(0), shared.inputs);
  const Eigen::VectorXd resid =
      forward_batch(spec, theta0.block(0), shared.inputs) - shared.targets;
  const Eigen::VectorXd step = (eta / (10.0 * 3.0)) * (jac.transpose() * resid);
  for (int q = 0; q < 3; ++q)
    CHECK(testutil::max_abs_diff(next.block(q), theta0.block(q) - step) < 1e-14);
}

TEST_CASE("run_training records losses and stays deterministic") {
  const ModelSpec spec = make_affine(4);
  const AgentData data = blob_agents(4, 8, 4, 70);
  const StackedParams theta0 = sync_init(spec, 71, 4);
  const MixingMatrix w = metropolis_hastings(build_topology(TopologyKind::Star, 4));

  const TrajectoryRecord one = run_training(Algorithm::Dgd, 1, 1e-3, spec, theta0, data, w);
  CHECK(one.losses.rows() == 2);  // k = 0 and k = 1
  CHECK(one.losses.cols() == 4);
  CHECK(one.losses.minCoeff() >= 0.0);

  const TrajectoryRecord a = run_training(Algorithm::Atc, 20, 1e-3, spec, theta0, data, w, true);
  const TrajectoryRecord b = run_training(Algorithm::Atc, 20, 1e-3, spec, theta0, data, w, true);
  CHECK(testutil::bitwise_equal(a.losses, b.losses));
  CHECK(a.parameters.size() == 21);
  CHECK(testutil::bitwise_equal(a.parameters.back(), b.parameters.back()));

  CHECK_THROWS_AS(run_training(Algorithm::Dgd, 0, 1e-3, spec, theta0, data, w),
                  std::invalid_argument);
}

TEST_CASE("global loss decays on the blob task") {
  const ModelSpec spec = make_affine(16);
  const AgentData data = blob_agents(8, 50, 16, 90);
  const StackedParams theta0 = sync_init(spec, 91, 8);
  const MixingMatrix w = metropolis_hastings(build_topology(TopologyKind::Complete, 8));
  const TrajectoryRecord record =
      run_training(Algorithm::Dgd, 50, 1e-4, spec, theta0, data, w);
  for (Eigen::Index k = 1; k < record.losses.rows(); ++k)
    CHECK(record.losses.row(k).mean() <= record.losses.row(k - 1).mean() + 1e-12);
  CHECK(record.losses.row(50).mean() < record.losses.row(0).mean());
}

TEST_CASE("divergence aborts with a diagnostic") {
  const ModelSpec spec = make_affine(4);
  const AgentData data = blob_agents(2, 4, 4, 100);
  const StackedParams theta0 = sync_init(spec, 101, 2);
  const MixingMatrix w = metropolis_hastings(build_topology(TopologyKind::Complete, 2));
  CHECK_THROWS_WITH_AS(run_training(Algorithm::Dgd, 400, 1e6, spec, theta0, data, w),
                       doctest::Contains("non-finite"), std::runtime_error);
}
