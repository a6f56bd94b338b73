#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "peerdyn/experiment.hpp"
#include "peerdyn/expm.hpp"

namespace py = pybind11;
using namespace peerdyn;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Peer-to-peer training dynamics: simulator and analytic predictor";
  m.attr("__version__") = "0.1.0";

  // --- mixing ---------------------------------------------------------------
  py::enum_<TopologyKind>(m, "TopologyKind")
      .value("cycle", TopologyKind::Cycle)
      .value("star", TopologyKind::Star)
      .value("complete", TopologyKind::Complete)
      .value("custom", TopologyKind::Custom);

  py::class_<CommGraph>(m, "CommGraph")
      .def_readonly("num_agents", &CommGraph::num_agents)
      .def_readonly("edges", &CommGraph::edges)
      .def("degrees", &CommGraph::degrees)
      .def("has_edge", &CommGraph::has_edge);

  m.def("build_topology", &build_topology, py::arg("kind"), py::arg("num_agents"),
        py::arg("custom_edges") = std::vector<std::pair<int, int>>{});
  m.def("load_edge_list", &load_edge_list, py::arg("path"), py::arg("num_agents"));

  py::class_<MixingMatrix>(m, "MixingMatrix")
      .def_static("from_matrix", &MixingMatrix::from_matrix)
      .def_readonly("weights", &MixingMatrix::weights)
      .def("size", &MixingMatrix::size);

  m.def("metropolis_hastings", &metropolis_hastings);
  m.def("spectral_gap", &spectral_gap);

  py::enum_<LiftMode>(m, "LiftMode")
      .value("kron", LiftMode::Kron)
      .value("shifted_kron", LiftMode::ShiftedKron);

  py::class_<LiftedOperator>(m, "LiftedOperator")
      .def(py::init([](Eigen::MatrixXd base, int block_dim, LiftMode mode) {
             return LiftedOperator{std::move(base), block_dim, mode};
           }),
           py::arg("base"), py::arg("block_dim"), py::arg("mode") = LiftMode::Kron)
      .def("apply", &LiftedOperator::apply)
      .def("materialize", &LiftedOperator::materialize);

  // --- model ----------------------------------------------------------------
  py::enum_<Activation>(m, "Activation")
      .value("sigmoid", Activation::Sigmoid)
      .value("relu", Activation::Relu)
      .value("identity", Activation::Identity);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_readonly("widths", &ModelSpec::widths)
      .def_readonly("weight_std", &ModelSpec::weight_std)
      .def_readonly("bias_std", &ModelSpec::bias_std)
      .def("param_count", &ModelSpec::param_count)
      .def("input_dim", &ModelSpec::input_dim)
      .def("output_dim", &ModelSpec::output_dim);

  m.def("make_affine", &make_affine, py::arg("input_dim"), py::arg("output_dim") = 1);
  m.def(
      "make_mlp",
      [](std::vector<int> widths, Activation hidden, double s_w, double s_b) {
        return make_mlp(std::move(widths), hidden, s_w, s_b);
      },
      py::arg("widths"), py::arg("hidden") = Activation::Sigmoid, py::arg("s_w") = 1.0,
      py::arg("s_b") = 0.1);

  m.def("init_params", &init_params, py::arg("spec"), py::arg("seed"));
  m.def("forward", &forward);
  m.def("forward_batch", &forward_batch);
  m.def("jacobian", &jacobian);
  m.def("empirical_ntk", &empirical_ntk);

  // --- data -----------------------------------------------------------------
  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def(py::init([](Eigen::MatrixXd inputs, Eigen::MatrixXd targets) {
             return LabeledDataset{std::move(inputs), std::move(targets)};
           }),
           py::arg("inputs"), py::arg("targets"))
      .def_readonly("inputs", &LabeledDataset::inputs)
      .def_readonly("targets", &LabeledDataset::targets)
      .def("count", &LabeledDataset::count);

  py::class_<AgentData>(m, "AgentData")
      .def_readonly("agents", &AgentData::agents)
      .def("num_agents", &AgentData::num_agents)
      .def("samples_per_agent", &AgentData::samples_per_agent);

  m.def("load_mnist_idx", &load_mnist_idx, py::arg("images_path"), py::arg("labels_path"),
        py::arg("keep_digits") = std::vector<int>{0, 1});
  m.def("half_moons", &half_moons, py::arg("n"), py::arg("noise_std"), py::arg("seed"));
  m.def("gaussian_blobs", &gaussian_blobs, py::arg("n"), py::arg("dim"), py::arg("seed"));
  m.def("split_iid", &split_iid, py::arg("source"), py::arg("num_agents"),
        py::arg("per_agent"), py::arg("seed"));
  m.def("stack_targets", &stack_targets);

  // --- distopt ----------------------------------------------------------------
  py::enum_<Algorithm>(m, "Algorithm")
      .value("dgd", Algorithm::Dgd)
      .value("atc", Algorithm::Atc)
      .value("cta", Algorithm::Cta);

  py::class_<StackedParams>(m, "StackedParams")
      .def_readonly("values", &StackedParams::values)
      .def_readonly("num_agents", &StackedParams::num_agents)
      .def_readonly("params_per_agent", &StackedParams::params_per_agent)
      .def("block", [](const StackedParams& s, int q) { return Eigen::VectorXd(s.block(q)); });

  m.def("sync_init", &sync_init, py::arg("spec"), py::arg("seed"), py::arg("num_agents"));
  m.def("per_agent_losses", &per_agent_losses);
  m.def("global_mse_loss", &global_mse_loss);
  m.def("stacked_gradient", &stacked_gradient);
  m.def("dgd_step", &dgd_step);
  m.def("atc_step", &atc_step);
  m.def("cta_step", &cta_step);

  py::class_<TrajectoryRecord>(m, "TrajectoryRecord")
      .def_readonly("algorithm", &TrajectoryRecord::algorithm)
      .def_readonly("step_size", &TrajectoryRecord::step_size)
      .def_readonly("losses", &TrajectoryRecord::losses)
      .def_readonly("parameters", &TrajectoryRecord::parameters);

  m.def("run_training", &run_training, py::arg("algorithm"), py::arg("steps"),
        py::arg("step_size"), py::arg("spec"), py::arg("theta0"), py::arg("data"),
        py::arg("mixing"), py::arg("record_params") = false);

  // --- flow -------------------------------------------------------------------
  py::class_<LinearizationAnchor>(m, "LinearizationAnchor")
      .def_readonly("jacobians", &LinearizationAnchor::jacobians)
      .def_readonly("outputs0", &LinearizationAnchor::outputs0)
      .def_readonly("targets", &LinearizationAnchor::targets)
      .def_readonly("theta0", &LinearizationAnchor::theta0)
      .def("linearized_outputs", &LinearizationAnchor::linearized_outputs);

  m.def("build_anchor", &build_anchor);

  py::class_<LinearFlowSystem>(m, "LinearFlowSystem")
      .def_readonly("algorithm", &LinearFlowSystem::algorithm)
      .def_readonly("step_size", &LinearFlowSystem::step_size)
      .def("dim", &LinearFlowSystem::dim)
      .def("state_matrix", &LinearFlowSystem::state_matrix)
      .def("forcing", &LinearFlowSystem::forcing)
      .def("rhs", &LinearFlowSystem::rhs);

  m.def("build_system", &build_system, py::arg("algorithm"), py::arg("anchor"),
        py::arg("mixing"), py::arg("step_size"));
  m.def("expm", &expm);
  m.def("solve_lti", &solve_lti, py::arg("a"), py::arg("u"), py::arg("x0"), py::arg("times"));
  m.def("solve_closed_form", &solve_closed_form, py::arg("system"), py::arg("times"),
        py::arg("dense_cap") = 10000);
  m.def("integrate_system_rk4", &integrate_system_rk4, py::arg("system"), py::arg("times"),
        py::arg("dt"));

  py::enum_<FlowLoss>(m, "FlowLoss")
      .value("mse", FlowLoss::Mse)
      .value("cross_entropy", FlowLoss::CrossEntropy);

  m.def("integrate_flow", &integrate_flow, py::arg("system"), py::arg("loss"),
        py::arg("times"), py::arg("dt"));

  py::class_<PredictedLosses>(m, "PredictedLosses")
      .def_readonly("model", &PredictedLosses::model)
      .def_readonly("linearized", &PredictedLosses::linearized);

  m.def("predict_losses", &predict_losses);

  // --- stability ----------------------------------------------------------------
  py::enum_<StabilityVerdict>(m, "StabilityVerdict")
      .value("stable", StabilityVerdict::Stable)
      .value("marginal", StabilityVerdict::Marginal)
      .value("violated_precondition", StabilityVerdict::ViolatedPrecondition);

  py::class_<DoublyStochasticCheck>(m, "DoublyStochasticCheck")
      .def_readonly("max_row_deviation", &DoublyStochasticCheck::max_row_deviation)
      .def_readonly("max_col_deviation", &DoublyStochasticCheck::max_col_deviation)
      .def_readonly("min_entry", &DoublyStochasticCheck::min_entry)
      .def_readonly("pass_", &DoublyStochasticCheck::pass);

  py::class_<StabilityReport>(m, "StabilityReport")
      .def_readonly("algorithm", &StabilityReport::algorithm)
      .def_readonly("informational", &StabilityReport::informational)
      .def_readonly("doubly_stochastic", &StabilityReport::doubly_stochastic)
      .def_readonly("minimality_value", &StabilityReport::minimality_value)
      .def_readonly("abscissa", &StabilityReport::abscissa)
      .def_readonly("verdict", &StabilityReport::verdict)
      .def("to_text", &StabilityReport::to_text);

  py::class_<StabilityTolerances>(m, "StabilityTolerances").def(py::init<>());

  m.def("check_doubly_stochastic", &check_doubly_stochastic, py::arg("w"),
        py::arg("sum_tol") = 1e-10, py::arg("entry_floor") = -1e-12);
  m.def("minimality_check", &minimality_check);
  m.def("spectral_abscissa", &spectral_abscissa);
  m.def("bibo_report", &bibo_report, py::arg("algorithm"), py::arg("mixing"),
        py::arg("anchor"), py::arg("step_size"),
        py::arg("tolerances") = StabilityTolerances{});

  // --- experiment harness ---------------------------------------------------
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("num_agents", &ExperimentConfig::num_agents)
      .def_readwrite("per_agent", &ExperimentConfig::per_agent)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("step_size", &ExperimentConfig::step_size)
      .def_readwrite("steps", &ExperimentConfig::steps)
      .def("serialize", &ExperimentConfig::serialize);

  m.def("parse_config_file", &parse_config_file);
  m.def("run_simulate",
        [](const ExperimentConfig& cfg, const std::string& out) { cmd_simulate(cfg, out); });
  m.def("run_predict",
        [](const ExperimentConfig& cfg, const std::string& out) { cmd_predict(cfg, out); });
}
