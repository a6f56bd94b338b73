#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace peerdyn {

enum class TopologyKind { Cycle, Star, Complete, Custom };

TopologyKind topology_kind_from_string(const std::string& name);
std::string to_string(TopologyKind kind);

// Undirected simple graph over agents 0..num_agents-1. Self-loops are never
// stored as edges; they enter only through the mixing weights.
struct CommGraph {
  int num_agents = 0;
  std::vector<std::pair<int, int>> edges;  // normalized (q < r), sorted, unique

  std::vector<int> degrees() const;
  bool has_edge(int q, int r) const;
};

bool is_connected(const CommGraph& graph);

// Star hub is agent 0; cycle connects i to (i+1) mod Q. Throws on Q < 2 or
// an invalid/disconnected custom edge list.
CommGraph build_topology(TopologyKind kind, int num_agents,
                         const std::vector<std::pair<int, int>>& custom_edges = {});

// Plain-text edge list, one "q r" pair of zero-based indices per line.
CommGraph load_edge_list(const std::string& path, int num_agents);

// Symmetric doubly stochastic weight matrix. Construction validates the
// invariants (nonnegativity, symmetry, row/column sums within 1e-12 of 1).
struct MixingMatrix {
  Eigen::MatrixXd weights;

  int size() const { return static_cast<int>(weights.rows()); }
  static MixingMatrix from_matrix(Eigen::MatrixXd w);
};

// Neighbor weight 1/(1 + max(deg q, deg r)), self-weight fills the row to 1.
MixingMatrix metropolis_hastings(const CommGraph& graph);

// 1 - |lambda_2|, the distance of the second-largest-magnitude eigenvalue
// from 1. Defined as 1 for a single agent.
double spectral_gap(const MixingMatrix& w);

enum class LiftMode { Kron, ShiftedKron };

// Block operator base (x) I_P (Kron) or (base - I) (x) I_P (ShiftedKron),
// applied without materializing the QP x QP matrix.
struct LiftedOperator {
  Eigen::MatrixXd base;
  int block_dim = 0;
  LiftMode mode = LiftMode::Kron;

  Eigen::VectorXd apply(const Eigen::VectorXd& stacked) const;
  Eigen::MatrixXd materialize() const;  // explicit Kronecker product, small sizes only
};

LiftedOperator lift(const MixingMatrix& w, int block_dim);
LiftedOperator lift_shifted(const MixingMatrix& w, int block_dim);

}  // namespace peerdyn
