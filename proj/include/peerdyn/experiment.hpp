#pragma once

#include <filesystem>
#include <string>

#include "peerdyn/config.hpp"
#include "peerdyn/stability.hpp"
#include "peerdyn/trajectory_io.hpp"

namespace peerdyn {

// Deterministic materialization of a config: dataset shards, model spec,
// topology, mixing matrix, and the synchronized initialization.
struct ExperimentSetup {
  AgentData data;
  ModelSpec spec;
  CommGraph graph;
  MixingMatrix mixing;
  StackedParams theta0;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& config);

// Each command writes its artifacts into out_dir (created if needed) plus a
// config snapshot. File names are fixed: config.txt, observed.csv,
// predicted.csv, compare.txt, stability.txt, dynamics.svg, params.bin.
void cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out_dir);
void cmd_predict(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct CompareStats {
  Eigen::VectorXd per_agent_max_model;
  Eigen::VectorXd per_agent_mean_model;
  Eigen::VectorXd per_agent_max_linearized;
  Eigen::VectorXd per_agent_mean_linearized;
  double max_model = 0.0;
  double max_linearized = 0.0;

  std::string to_text() const;
};

// Joins observed.csv and predicted.csv on (step, agent), reports relative
// loss errors per mode, and renders the overlay plot.
CompareStats cmd_compare(const ExperimentConfig& config, const std::filesystem::path& out_dir);

StabilityReport cmd_stability(const ExperimentConfig& config,
                              const std::filesystem::path& out_dir);

// Relative-error comparison of two loss tables sharing (step, agent) keys.
// Tables without a mode column count as a single unnamed mode.
double max_relative_error(const LossTable& reference, const LossTable& candidate,
                          const std::string& mode = "");

}  // namespace peerdyn
