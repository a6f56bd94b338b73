#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "peerdyn/distopt.hpp"
#include "peerdyn/mixing.hpp"
#include "peerdyn/model.hpp"

namespace peerdyn {

enum class DataSource { Synthetic, HalfMoons, Mnist };
enum class SolverMethod { ClosedForm, Rk4, Auto };

DataSource data_source_from_string(const std::string& name);
SolverMethod solver_method_from_string(const std::string& name);
std::string to_string(DataSource s);
std::string to_string(SolverMethod m);

// Everything an experiment run needs. Parsed from a sectioned key = value
// file; unknown keys are rejected. Defaults mirror the reference setting
// (Q=8, D=200, eta=1e-4, K=200).
struct ExperimentConfig {
  // [model]
  ModelKind model_kind = ModelKind::Affine;
  std::vector<int> widths;              // required for ntk-mlp, empty for affine
  std::vector<Activation> activations;  // optional; default sigmoid hidden, identity head
  double weight_std = 1.0;
  double bias_std = 0.1;

  // [data]
  DataSource source = DataSource::Synthetic;
  std::string mnist_images;
  std::string mnist_labels;
  int synthetic_dim = 64;
  double noise_std = 0.1;
  int num_agents = 8;
  int per_agent = 200;
  std::uint64_t seed = 1;

  // [topology]
  TopologyKind topology = TopologyKind::Complete;
  std::string custom_edges_path;

  // [training]
  Algorithm algorithm = Algorithm::Dgd;
  double step_size = 1e-4;
  int steps = 200;
  bool record_params = false;

  // [solver]
  SolverMethod solver = SolverMethod::Auto;
  double rk4_dt = 0.01;
  long dense_cap = 10000;

  bool operator==(const ExperimentConfig&) const = default;

  std::string serialize() const;  // round-trips losslessly through parse()
  void validate() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& filename);
ExperimentConfig parse_config_file(const std::string& path);

}  // namespace peerdyn
