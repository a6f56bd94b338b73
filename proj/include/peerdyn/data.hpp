#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace peerdyn {

struct LabeledDataset {
  Eigen::MatrixXd inputs;   // count x N
  Eigen::MatrixXd targets;  // count x M

  Eigen::Index count() const { return inputs.rows(); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
  int target_dim() const { return static_cast<int>(targets.cols()); }
};

// Raw IDX tensors (big-endian headers, unsigned byte payload).
struct IdxImages {
  int count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // count*rows*cols
};

IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Filters to the digits in keep (default {0,1}), flattens row-major, scales
// pixels to [0,1], target = digit value.
LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                              const std::vector<int>& keep_digits = {0, 1});

// Two interleaved arcs: upper unit arc labeled 0, shifted lower arc labeled 1,
// with isotropic Gaussian coordinate noise. N=2, M=1.
LabeledDataset half_moons(int n, double noise_std, std::uint64_t seed);

// Two Gaussian blobs in [0,1]-ish range, labels 0/1; MNIST stand-in when the
// IDX files are unavailable.
LabeledDataset gaussian_blobs(int n, int dim, std::uint64_t seed);

// Per-agent datasets of a common size.
struct AgentData {
  std::vector<LabeledDataset> agents;

  int num_agents() const { return static_cast<int>(agents.size()); }
  int samples_per_agent() const { return static_cast<int>(agents.front().count()); }
  int input_dim() const { return agents.front().input_dim(); }
  int target_dim() const { return agents.front().target_dim(); }
  void validate() const;
};

// Uniform draws: disjoint shards when Q*D fits in the source (sampling
// without replacement), with replacement otherwise.
AgentData split_iid(const LabeledDataset& source, int num_agents, int per_agent,
                    std::uint64_t seed);

// Stacked label vector in R^{QMD}, agent-major, sample-major, coordinate-minor.
Eigen::VectorXd stack_targets(const AgentData& data);

}  // namespace peerdyn
