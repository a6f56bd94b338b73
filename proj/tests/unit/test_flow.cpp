#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

#include "peerdyn/expm.hpp"
#include "peerdyn/flow.hpp"
#include "peerdyn/rng.hpp"

using namespace peerdyn;

namespace {

struct Problem {
  ModelSpec spec;
  AgentData data;
  StackedParams theta0;
  MixingMatrix mixing;
};

Problem affine_problem(int num_agents, int per_agent, int dim, std::uint64_t seed,
                       TopologyKind topology = TopologyKind::Complete) {
  Problem p{make_affine(dim),
            split_iid(gaussian_blobs(num_agents * per_agent, dim, seed), num_agents,
                      per_agent, seed + 1),
            sync_init(make_affine(dim), seed + 2, num_agents),
            metropolis_hastings(build_topology(topology, num_agents))};
  return p;
}

std::vector<double> grid(int steps) {
  std::vector<double> t(steps + 1);
  for (int k = 0; k <= steps; ++k) t[k] = k;
  return t;
}

}  // namespace

TEST_CASE("anchor blocks, outputs, and the affine Jacobian") {
  Problem p = affine_problem(3, 4, 2, 60);
  const LinearizationAnchor anchor = build_anchor(p.spec, p.theta0, p.data);
  CHECK(anchor.num_agents == 3);
  CHECK(anchor.params_per_agent == 3);
  CHECK(anchor.rows_per_agent == 4);

  for (int q = 0; q < 3; ++q) {
    // Affine rows are [x^T, 1] regardless of theta0.
    for (int i = 0; i < 4; ++i) {
      CHECK(testutil::bitwise_equal(anchor.jacobians[q].row(i).head(2),
                                     p.data.agents[q].inputs.row(i)));
      CHECK(anchor.jacobians[q](i, 2) == 1.0);
    }
    // The linearization at theta0 reproduces f0 exactly.
    const Eigen::VectorXd fbar = anchor.linearized_outputs(q, p.theta0.block(q));
    CHECK(testutil::bitwise_equal(fbar, anchor.outputs0.segment(q * 4, 4)));
  }

  // Identical initialization and identical data give identical blocks.
  AgentData same;
  same.agents = {p.data.agents[0], p.data.agents[0]};
  const StackedParams t2 = sync_init(p.spec, 3, 2);
  const LinearizationAnchor a2 = build_anchor(p.spec, t2, same);
  CHECK(testutil::bitwise_equal(a2.jacobians[0], a2.jacobians[1]));
}

TEST_CASE("state matrices match the written-out flow forms") {
  Problem p = affine_problem(3, 4, 2, 61, TopologyKind::Cycle);
  const LinearizationAnchor anchor = build_anchor(p.spec, p.theta0, p.data);
  const double eta = 1e-2;
  const double c = eta / (4.0 * 3.0);
  const Eigen::Index pdim = 3;

  // Assemble the oracle pieces explicitly.
  const Eigen::MatrixXd wshift = lift_shifted(p.mixing, pdim).materialize();
  const Eigen::MatrixXd wlift = lift(p.mixing, pdim).materialize();
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(9, 9);
  Eigen::VectorXd jr(9);
  for (int q = 0; q < 3; ++q) {
    psi.block(q * 3, q * 3, 3, 3) =
        anchor.jacobians[q].transpose() * anchor.jacobians[q];
    jr.segment(q * 3, 3) = anchor.jacobians[q].transpose() *
                           (anchor.outputs0.segment(q * 4, 4) -
                            anchor.targets.segment(q * 4, 4));
  }
  const Eigen::VectorXd base = jr - psi * anchor.theta0;

  const LinearFlowSystem dgd = build_system(Algorithm::Dgd, anchor, p.mixing, eta);
  CHECK(testutil::max_abs_diff(dgd.state_matrix(), wshift - c * psi) < 1e-13);
  CHECK(testutil::max_abs_diff(dgd.forcing(), (-c * base).eval()) < 1e-13);

  const LinearFlowSystem atc = build_system(Algorithm::Atc, anchor, p.mixing, eta);
  CHECK(testutil::max_abs_diff(atc.state_matrix(), wshift - c * (wlift * psi)) < 1e-13);
  CHECK(testutil::max_abs_diff(atc.forcing(), (-c * (wlift * base)).eval()) < 1e-13);

  const LinearFlowSystem cta = build_system(Algorithm::Cta, anchor, p.mixing, eta);
  CHECK(testutil::max_abs_diff(cta.state_matrix(), wshift - c * (psi * wlift)) < 1e-13);
  CHECK(testutil::max_abs_diff(cta.forcing(), (-c * base).eval()) < 1e-13);

  // Matrix-free RHS agrees with the materialized system.
  Rng rng(5);
  for (const auto* sys : {&dgd, &atc, &cta}) {
    Eigen::VectorXd x(9);
    for (int i = 0; i < 9; ++i) x(i) = rng.normal();
    const Eigen::VectorXd expected = sys->state_matrix() * x + sys->forcing();
    CHECK(testutil::max_abs_diff(sys->rhs(x), expected) < 1e-12);
  }
}

TEST_CASE("W = I collapses the three systems and Q=1 recovers single-agent flow") {
  Problem p = affine_problem(3, 4, 2, 62);
  p.mixing = MixingMatrix::from_matrix(Eigen::MatrixXd::Identity(3, 3));
  const LinearizationAnchor anchor = build_anchor(p.spec, p.theta0, p.data);
  const double eta = 1e-2;
  const LinearFlowSystem dgd = build_system(Algorithm::Dgd, anchor, p.mixing, eta);
  const LinearFlowSystem atc = build_system(Algorithm::Atc, anchor, p.mixing, eta);
  const LinearFlowSystem cta = build_system(Algorithm::Cta, anchor, p.mixing, eta);
  CHECK(testutil::max_abs_diff(dgd.state_matrix(), atc.state_matrix()) <= 1e-15);
  CHECK(testutil::max_abs_diff(dgd.state_matrix(), cta.state_matrix()) <= 1e-15);
  CHECK(testutil::max_abs_diff(dgd.forcing(), atc.forcing()) <= 1e-15);
  CHECK(testutil::max_abs_diff(dgd.forcing(), cta.forcing()) <= 1e-15);

  // Q = 1: A = -(eta/D) Psi.
  Problem single{make_affine(2), split_iid(gaussian_blobs(4, 2, 63), 1, 4, 64),
                 sync_init(make_affine(2), 65, 1),
                 MixingMatrix::from_matrix(Eigen::MatrixXd::Identity(1, 1))};
  const LinearizationAnchor a1 = build_anchor(single.spec, single.theta0, single.data);
  const LinearFlowSystem s1 = build_system(Algorithm::Dgd, a1, single.mixing, eta);
  const Eigen::MatrixXd psi = a1.jacobians[0].transpose() * a1.jacobians[0];
  CHECK(testutil::max_abs_diff(s1.state_matrix(), (-(eta / 4.0) * psi).eval()) < 1e-15);

  // Perfect initial fit with theta0 = 0 gives zero forcing.
  Problem fit = affine_problem(2, 3, 2, 64);
  fit.theta0.values.setZero();
  for (auto& agent : fit.data.agents) agent.targets.setZero();  // f(x;0) = 0 = y
  const LinearizationAnchor af = build_anchor(fit.spec, fit.theta0, fit.data);
  const LinearFlowSystem sf = build_system(Algorithm::Dgd, af, fit.mixing, eta);
  CHECK(sf.forcing().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_lti basics") {
  // t = 0 returns the initial state.
  Eigen::MatrixXd a(2, 2);
  a << -1.0, 0.3, 0.1, -0.5;
  Eigen::VectorXd u(2), x0(2);
  u << 0.2, -0.1;
  x0 << 1.0, 2.0;
  const auto at0 = solve_lti(a, u, x0, {0.0});
  CHECK(testutil::bitwise_equal(at0[0], x0));

  // A = 0: pure integrator, x(t) = x0 + t u.
  const auto ramp = solve_lti(Eigen::MatrixXd::Zero(2, 2), u, x0, {0.0, 0.5, 2.0});
  CHECK(testutil::max_abs_diff(ramp[1], (x0 + 0.5 * u).eval()) < 1e-14);
  CHECK(testutil::max_abs_diff(ramp[2], (x0 + 2.0 * u).eval()) < 1e-14);

  CHECK_THROWS_AS(solve_lti(a, u, x0, {1.0, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(solve_lti(a, u, x0, {}), std::invalid_argument);
}

TEST_CASE("augmented solution equals the invertible-A formula") {
  Rng rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.integer(19));
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i / n, i % n) = rng.normal();
    a /= std::max(1.0, a.norm() / 2.0);
    a -= Eigen::MatrixXd::Identity(n, n) * 0.3;  // keep it comfortably invertible
    Eigen::VectorXd u(n), x0(n);
    for (int i = 0; i < n; ++i) {
      u(i) = rng.normal();
      x0(i) = rng.normal();
    }
    const double t = 0.8;
    const auto solved = solve_lti(a, u, x0, {t});
    const Eigen::MatrixXd phi = expm(t * a);
    const Eigen::VectorXd direct =
        phi * x0 + a.partialPivLu().solve((phi - Eigen::MatrixXd::Identity(n, n)) * u);
    CHECK(testutil::max_abs_diff(solved[0], direct) /
              std::max(1.0, direct.cwiseAbs().maxCoeff()) <
          1e-9);
  }
}

TEST_CASE("rk4 integrates a scalar decay accurately") {
  const auto rhs = [](double, const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  const auto states = integrate_rk4(rhs, x0, {0.0, 1.0}, 1e-2);
  CHECK(std::abs(states[1](0) - std::exp(-1.0)) < 1e-9);
}

TEST_CASE("rk4 aborts on non-finite states with the step index") {
  const auto blowup = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(x.array().square().matrix() * 1e3);
  };
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  CHECK_THROWS_WITH_AS(integrate_rk4(blowup, x0, {0.0, 10.0}, 0.1),
                       doctest::Contains("step"), std::runtime_error);
}

TEST_CASE("rk4 shows fourth-order error decay") {
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, -4.0, -0.4;
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.0;
  const Eigen::VectorXd exact = expm(2.0 * a) * x0;
  const auto rhs = [&a](double, const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); };
  const double coarse =
      (integrate_rk4(rhs, x0, {0.0, 2.0}, 0.1)[1] - exact).cwiseAbs().maxCoeff();
  const double fine =
      (integrate_rk4(rhs, x0, {0.0, 2.0}, 0.05)[1] - exact).cwiseAbs().maxCoeff();
  CHECK(coarse / fine > 12.0);
  CHECK(coarse / fine < 20.0);
}

TEST_CASE("closed form and rk4 cross-validate on the linearized flow") {
  Problem p = affine_problem(4, 5, 3, 65, TopologyKind::Star);
  const LinearizationAnchor anchor = build_anchor(p.spec, p.theta0, p.data);
  for (Algorithm alg : {Algorithm::Dgd, Algorithm::Atc, Algorithm::Cta}) {
    const LinearFlowSystem system = build_system(alg, anchor, p.mixing, 1e-2);
    const auto closed = solve_closed_form(system, grid(10));
    const auto rk = integrate_system_rk4(system, grid(10), 1e-3);
    for (std::size_t k = 0; k < closed.size(); ++k) {
      const double scale = std::max(1.0, closed[k].cwiseAbs().maxCoeff());
      CHECK(testutil::max_abs_diff(closed[k], rk[k]) / scale < 1e-8);
    }
  }
}

TEST_CASE("solve_closed_form enforces the dense cap") {
  Problem p = affine_problem(2, 3, 2, 66);
  const LinearFlowSystem system =
      build_system(Algorithm::Dgd, build_anchor(p.spec, p.theta0, p.data), p.mixing, 1e-2);
  CHECK_THROWS_WITH_AS(solve_closed_form(system, grid(3), 4),
                       doctest::Contains("integrate_system_rk4"), std::runtime_error);
}

TEST_CASE("consensus limit with zero kernel and zero forcing") {
  const int q = 8, pdim = 5;
  const MixingMatrix w = metropolis_hastings(build_topology(TopologyKind::Cycle, q));
  const double gap = spectral_gap(w);
  REQUIRE(gap > 0.0);

  Rng rng(44);
  Eigen::VectorXd theta0(q * pdim);
  for (Eigen::Index i = 0; i < theta0.size(); ++i) theta0(i) = rng.normal();

  const Eigen::MatrixXd a = lift_shifted(w, pdim).materialize();
  const double t = 50.0 / gap;
  const auto states = solve_lti(a, Eigen::VectorXd::Zero(q * pdim), theta0, {t});

  Eigen::VectorXd average = Eigen::VectorXd::Zero(pdim);
  for (int agent = 0; agent < q; ++agent) average += theta0.segment(agent * pdim, pdim);
  average /= q;
  for (int agent = 0; agent < q; ++agent)
    CHECK(testutil::max_abs_diff(states[0].segment(agent * pdim, pdim), average) < 1e-6);
}

TEST_CASE("cross-entropy flow RHS matches finite differences of the objective") {
  Problem p = affine_problem(3, 4, 2, 67, TopologyKind::Cycle);
  // {0,1} targets for the sigmoid pairing.
  const LinearizationAnchor anchor = build_anchor(p.spec, p.theta0, p.data);
  const double eta = 1e-2;
  const LinearFlowSystem system = build_system(Algorithm::Dgd, anchor, p.mixing, eta);

  // Objective: (1/DQ) sum_q sum_i bce(sigmoid(fbar_qi), y_qi).
  const auto objective = [&](const Eigen::VectorXd& state) {
    double total = 0.0;
    for (int agent = 0; agent < 3; ++agent) {
      const Eigen::VectorXd fbar =
          anchor.linearized_outputs(agent, state.segment(agent * 3, 3));
      for (int i = 0; i < 4; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-fbar(i)));
        const double y = anchor.targets(agent * 4 + i);
        total += -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
      }
    }
    return total / (4.0 * 3.0);
  };

  Rng rng(7);
  Eigen::VectorXd state(9);
  for (int i = 0; i < 9; ++i) state(i) = rng.normal();

  const Eigen::VectorXd rhs_analytic = flow_rhs(system, FlowLoss::CrossEntropy, state);

  const Eigen::VectorXd mix_part = lift_shifted(p.mixing, 3).apply(state);
  Eigen::VectorXd grad_fd(9);
  const double fd_h = 1e-6;
  for (int j = 0; j < 9; ++j) {
    Eigen::VectorXd hi = state, lo = state;
    hi(j) += fd_h;
    lo(j) -= fd_h;
    grad_fd(j) = (objective(hi) - objective(lo)) / (2.0 * fd_h);
  }
  const Eigen::VectorXd rhs_expected = mix_part - eta * grad_fd;
  CHECK(testutil::max_abs_diff(rhs_analytic, rhs_expected) < 1e-8);

  // The integrator runs on the same RHS.
  const auto states = integrate_flow(system, FlowLoss::CrossEntropy, {0.0, 0.5}, 1e-3);
  CHECK(states[1].allFinite());
  CHECK(testutil::max_abs_diff(states[0], anchor.theta0) == 0.0);
}

TEST_CASE("cross-entropy flow with one-hot targets uses the softmax pairing") {
  // Two-output affine model, one-hot labels.
  const int q = 2, d = 3, n = 2, m = 2;
  const ModelSpec spec = make_affine(n, m);
  AgentData data;
  data.agents.resize(q);
  Rng rng(71);
  for (auto& agent : data.agents) {
    agent.inputs.resize(d, n);
    agent.targets = Eigen::MatrixXd::Zero(d, m);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < n; ++j) agent.inputs(i, j) = rng.normal();
      agent.targets(i, static_cast<int>(rng.integer(m))) = 1.0;
    }
  }
  const StackedParams theta0 = sync_init(spec, 72, q);
  const MixingMatrix w = metropolis_hastings(build_topology(TopologyKind::Complete, q));
  const double eta = 1e-2;
  const LinearFlowSystem system =
      build_system(Algorithm::Dgd, build_anchor(spec, theta0, data), w, eta);

  const auto objective = [&](const Eigen::VectorXd& state) {
    double total = 0.0;
    const Eigen::Index p = system.anchor.params_per_agent;
    for (int agent = 0; agent < q; ++agent) {
      const Eigen::VectorXd fbar =
          system.anchor.linearized_outputs(agent, state.segment(agent * p, p));
      for (int i = 0; i < d; ++i) {
        const auto logits = fbar.segment(i * m, m);
        const double zmax = logits.maxCoeff();
        const double lse = zmax + std::log((logits.array() - zmax).exp().sum());
        for (int c = 0; c < m; ++c)
          total -= system.anchor.targets(agent * d * m + i * m + c) * (logits(c) - lse);
      }
    }
    return total / (static_cast<double>(d) * q);
  };

  Eigen::VectorXd state(system.dim());
  for (Eigen::Index i = 0; i < state.size(); ++i) state(i) = rng.normal();
  const Eigen::VectorXd analytic = flow_rhs(system, FlowLoss::CrossEntropy, state);

  Eigen::VectorXd grad_fd(state.size());
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < state.size(); ++j) {
    Eigen::VectorXd hi = state, lo = state;
    hi(j) += h;
    lo(j) -= h;
    grad_fd(j) = (objective(hi) - objective(lo)) / (2.0 * h);
  }
  const Eigen::VectorXd expected =
      lift_shifted(w, static_cast<int>(system.anchor.params_per_agent)).apply(state) -
      eta * grad_fd;
  CHECK(testutil::max_abs_diff(analytic, expected) < 1e-8);
}

TEST_CASE("predicted losses: modes coincide for affine and anchor reproduces k=0") {
  Problem p = affine_problem(3, 5, 2, 68);
  const LinearizationAnchor anchor = build_anchor(p.spec, p.theta0, p.data);
  const LinearFlowSystem system = build_system(Algorithm::Dgd, anchor, p.mixing, 1e-2);
  const auto states = solve_closed_form(system, grid(20));
  const PredictedLosses losses = predict_losses(anchor, p.spec, p.data, states);

  // Affine model equals its linearization.
  for (Eigen::Index k = 0; k < losses.model.rows(); ++k)
    for (Eigen::Index q = 0; q < losses.model.cols(); ++q)
      CHECK(losses.model(k, q) ==
            doctest::Approx(losses.linearized(k, q)).epsilon(1e-10));

  // k = 0 reproduces the simulated initial loss bit-for-bit.
  const Eigen::VectorXd initial = per_agent_losses(p.spec, p.theta0, p.data);
  for (int q = 0; q < 3; ++q) CHECK(losses.model(0, q) == initial(q));
}

TEST_CASE("affine discrete iterates track the closed-form flow") {
  Problem p = affine_problem(4, 10, 8, 69);
  const double eta = 1e-4;
  const int steps = 100;
  const TrajectoryRecord sim =
      run_training(Algorithm::Dgd, steps, eta, p.spec, p.theta0, p.data, p.mixing);
  const LinearizationAnchor anchor = build_anchor(p.spec, p.theta0, p.data);
  const LinearFlowSystem system = build_system(Algorithm::Dgd, anchor, p.mixing, eta);
  const auto states = solve_closed_form(system, grid(steps));
  const PredictedLosses pred = predict_losses(anchor, p.spec, p.data, states);

  double worst = 0.0;
  for (int k = 0; k <= steps; ++k)
    for (int q = 0; q < 4; ++q)
      worst = std::max(worst, std::abs(pred.model(k, q) - sim.losses(k, q)) /
                                  sim.losses(k, q));
  CHECK(worst <= 0.01);
}
