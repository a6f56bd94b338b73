#include "peerdyn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "peerdyn/svg_plot.hpp"

namespace peerdyn {

namespace {

// Separate derived seeds per purpose so dataset and initialization draws do
// not alias.
constexpr std::uint64_t kDataSeedOffset = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kInitSeedOffset = 0xd1b54a32d192ed03ull;

LabeledDataset source_dataset(const ExperimentConfig& cfg) {
  const std::uint64_t seed = cfg.seed ^ kDataSeedOffset;
  const int pool = cfg.num_agents * cfg.per_agent;
  switch (cfg.source) {
    case DataSource::Synthetic:
      return gaussian_blobs(pool, cfg.synthetic_dim, seed);
    case DataSource::HalfMoons:
      return half_moons(pool, cfg.noise_std, seed);
    case DataSource::Mnist:
      return load_mnist_idx(cfg.mnist_images, cfg.mnist_labels);
  }
  throw std::logic_error("unreachable data source");
}

ModelSpec resolve_spec(const ExperimentConfig& cfg, const LabeledDataset& source) {
  if (cfg.model_kind == ModelKind::Affine)
    return make_affine(source.input_dim(), source.target_dim());
  if (cfg.widths.front() != source.input_dim())
    throw std::runtime_error("config: widths[0] = " + std::to_string(cfg.widths.front()) +
                             " does not match the dataset input dimension " +
                             std::to_string(source.input_dim()));
  if (cfg.widths.back() != source.target_dim())
    throw std::runtime_error("config: widths last entry does not match the target dimension " +
                             std::to_string(source.target_dim()));
  if (cfg.activations.empty())
    return make_mlp(cfg.widths, Activation::Sigmoid, cfg.weight_std, cfg.bias_std);
  return make_mlp(cfg.widths, cfg.activations, cfg.weight_std, cfg.bias_std);
}

std::vector<double> unit_times(int steps) {
  std::vector<double> times(steps + 1);
  for (int k = 0; k <= steps; ++k) times[k] = static_cast<double>(k);
  return times;
}

void write_snapshot(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir / "config.txt");
  if (!out) throw std::runtime_error("cannot write config snapshot in " + out_dir.string());
  out << cfg.serialize();
}

}  // namespace

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSetup setup;
  const LabeledDataset source = source_dataset(cfg);
  setup.spec = resolve_spec(cfg, source);
  setup.data = split_iid(source, cfg.num_agents, cfg.per_agent, cfg.seed ^ kDataSeedOffset);
  setup.graph = cfg.topology == TopologyKind::Custom
                    ? load_edge_list(cfg.custom_edges_path, cfg.num_agents)
                    : build_topology(cfg.topology, cfg.num_agents);
  setup.mixing = metropolis_hastings(setup.graph);
  setup.theta0 = sync_init(setup.spec, cfg.seed ^ kInitSeedOffset, cfg.num_agents);
  return setup;
}

void cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const ExperimentSetup setup = prepare_experiment(cfg);
  const TrajectoryRecord record =
      run_training(cfg.algorithm, cfg.steps, cfg.step_size, setup.spec, setup.theta0,
                   setup.data, setup.mixing, cfg.record_params);
  write_snapshot(cfg, out_dir);
  write_observed_csv((out_dir / "observed.csv").string(), record);
  if (cfg.record_params) write_params_bin((out_dir / "params.bin").string(), record.parameters);
}

void cmd_predict(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const ExperimentSetup setup = prepare_experiment(cfg);
  const LinearizationAnchor anchor = build_anchor(setup.spec, setup.theta0, setup.data);
  const LinearFlowSystem system =
      build_system(cfg.algorithm, anchor, setup.mixing, cfg.step_size);

  const std::vector<double> times = unit_times(cfg.steps);
  const bool dense_ok = system.dim() <= cfg.dense_cap;
  std::vector<Eigen::VectorXd> states;
  switch (cfg.solver) {
    case SolverMethod::ClosedForm:
      states = solve_closed_form(system, times, cfg.dense_cap);
      break;
    case SolverMethod::Rk4:
      states = integrate_system_rk4(system, times, cfg.rk4_dt);
      break;
    case SolverMethod::Auto:
      states = dense_ok ? solve_closed_form(system, times, cfg.dense_cap)
                        : integrate_system_rk4(system, times, cfg.rk4_dt);
      break;
  }

  const PredictedLosses losses = predict_losses(anchor, setup.spec, setup.data, states);
  write_snapshot(cfg, out_dir);
  write_predicted_csv((out_dir / "predicted.csv").string(), losses);
  if (cfg.record_params) write_params_bin((out_dir / "predicted_params.bin").string(), states);
}

namespace {

struct Key {
  int step;
  int agent;
  auto operator<=>(const Key&) const = default;
};

std::map<Key, double> index_rows(const LossTable& table, const std::string& mode) {
  std::map<Key, double> out;
  for (const auto& row : table.rows) {
    if (table.has_mode && row.mode != mode) continue;
    out[{row.step, row.agent}] = row.loss;
  }
  return out;
}

double relative_error(double reference, double candidate) {
  const double diff = std::abs(candidate - reference);
  if (diff == 0.0) return 0.0;
  return diff / std::max(std::abs(reference), 1e-300);
}

}  // namespace

double max_relative_error(const LossTable& reference, const LossTable& candidate,
                          const std::string& mode) {
  const auto ref = index_rows(reference, reference.has_mode ? mode : "");
  const auto cand = index_rows(candidate, candidate.has_mode ? mode : "");
  if (ref.empty() || cand.empty())
    throw std::runtime_error("max_relative_error: no rows to compare");
  double worst = 0.0;
  for (const auto& [key, loss] : ref) {
    const auto it = cand.find(key);
    if (it == cand.end())
      throw std::runtime_error("max_relative_error: missing row for step " +
                               std::to_string(key.step) + ", agent " +
                               std::to_string(key.agent));
    worst = std::max(worst, relative_error(loss, it->second));
  }
  return worst;
}

std::string CompareStats::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "max_relative_error_model = " << max_model << "\n";
  out << "max_relative_error_linearized = " << max_linearized << "\n";
  for (Eigen::Index q = 0; q < per_agent_max_model.size(); ++q) {
    out << "agent_" << q << "_max_relative_error_model = " << per_agent_max_model(q) << "\n";
    out << "agent_" << q << "_mean_relative_error_model = " << per_agent_mean_model(q)
        << "\n";
    out << "agent_" << q
        << "_max_relative_error_linearized = " << per_agent_max_linearized(q) << "\n";
    out << "agent_" << q
        << "_mean_relative_error_linearized = " << per_agent_mean_linearized(q) << "\n";
  }
  return out.str();
}

CompareStats cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto observed_path = out_dir / "observed.csv";
  const auto predicted_path = out_dir / "predicted.csv";
  if (!std::filesystem::exists(observed_path))
    throw std::runtime_error("missing " + observed_path.string() +
                             "; run the simulate command first");
  if (!std::filesystem::exists(predicted_path))
    throw std::runtime_error("missing " + predicted_path.string() +
                             "; run the predict command first");

  const LossTable observed = read_loss_csv(observed_path.string());
  const LossTable predicted = read_loss_csv(predicted_path.string());
  const auto obs = index_rows(observed, "");
  const auto pred_model = index_rows(predicted, "model");
  const auto pred_lin = index_rows(predicted, "linearized");
  if (obs.empty()) throw std::runtime_error(observed_path.string() + " has no rows");
  if (pred_model.empty() && pred_lin.empty())
    throw std::runtime_error(predicted_path.string() + " has no rows");

  int num_agents = 0, num_steps = 0;
  for (const auto& [key, _] : obs) {
    num_agents = std::max(num_agents, key.agent + 1);
    num_steps = std::max(num_steps, key.step + 1);
  }

  CompareStats stats;
  stats.per_agent_max_model = Eigen::VectorXd::Zero(num_agents);
  stats.per_agent_mean_model = Eigen::VectorXd::Zero(num_agents);
  stats.per_agent_max_linearized = Eigen::VectorXd::Zero(num_agents);
  stats.per_agent_mean_linearized = Eigen::VectorXd::Zero(num_agents);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_agents);

  Eigen::MatrixXd obs_grid(num_steps, num_agents), pred_grid(num_steps, num_agents);
  obs_grid.setZero();
  pred_grid.setZero();

  for (const auto& [key, loss] : obs) {
    const auto handle = [&](const std::map<Key, double>& table, Eigen::VectorXd& worst,
                            Eigen::VectorXd& sum) {
      const auto it = table.find(key);
      if (it == table.end())
        throw std::runtime_error("predicted.csv is missing step " + std::to_string(key.step) +
                                 ", agent " + std::to_string(key.agent));
      const double err = relative_error(loss, it->second);
      worst(key.agent) = std::max(worst(key.agent), err);
      sum(key.agent) += err;
      return it->second;
    };
    const double model_loss =
        handle(pred_model, stats.per_agent_max_model, stats.per_agent_mean_model);
    handle(pred_lin, stats.per_agent_max_linearized, stats.per_agent_mean_linearized);
    counts(key.agent) += 1.0;
    obs_grid(key.step, key.agent) = loss;
    pred_grid(key.step, key.agent) = model_loss;
  }
  stats.per_agent_mean_model.array() /= counts.array().max(1.0);
  stats.per_agent_mean_linearized.array() /= counts.array().max(1.0);
  stats.max_model = stats.per_agent_max_model.maxCoeff();
  stats.max_linearized = stats.per_agent_max_linearized.maxCoeff();

  write_snapshot(cfg, out_dir);
  std::ofstream report(out_dir / "compare.txt");
  if (!report) throw std::runtime_error("cannot write compare.txt");
  report << stats.to_text();
  write_loss_plot((out_dir / "dynamics.svg").string(), obs_grid, pred_grid,
                  to_string(cfg.algorithm) + " loss dynamics, " +
                      (cfg.topology == TopologyKind::Custom
                           ? std::string("custom")
                           : to_string(cfg.topology)) +
                      " graph");
  return stats;
}

StabilityReport cmd_stability(const ExperimentConfig& cfg,
                              const std::filesystem::path& out_dir) {
  const ExperimentSetup setup = prepare_experiment(cfg);
  const LinearizationAnchor anchor = build_anchor(setup.spec, setup.theta0, setup.data);
  const StabilityReport report =
      bibo_report(cfg.algorithm, setup.mixing, anchor, cfg.step_size);
  write_snapshot(cfg, out_dir);
  std::ofstream out(out_dir / "stability.txt");
  if (!out) throw std::runtime_error("cannot write stability.txt");
  out << report.to_text();
  return report;
}

}  // namespace peerdyn
