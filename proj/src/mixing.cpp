#include "peerdyn/mixing.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace peerdyn {

TopologyKind topology_kind_from_string(const std::string& name) {
  if (name == "cycle") return TopologyKind::Cycle;
  if (name == "star") return TopologyKind::Star;
  if (name == "complete") return TopologyKind::Complete;
  if (name == "custom" || name.starts_with("custom:")) return TopologyKind::Custom;
  throw std::invalid_argument("unknown topology '" + name +
                              "' (expected cycle|star|complete|custom:<path>)");
}

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::Cycle: return "cycle";
    case TopologyKind::Star: return "star";
    case TopologyKind::Complete: return "complete";
    case TopologyKind::Custom: return "custom";
  }
  return "?";
}

std::vector<int> CommGraph::degrees() const {
  std::vector<int> deg(num_agents, 0);
  for (const auto& [q, r] : edges) {
    ++deg[q];
    ++deg[r];
  }
  return deg;
}

bool CommGraph::has_edge(int q, int r) const {
  if (q > r) std::swap(q, r);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(q, r));
}

bool is_connected(const CommGraph& graph) {
  if (graph.num_agents <= 0) return false;
  std::vector<std::vector<int>> adj(graph.num_agents);
  for (const auto& [q, r] : graph.edges) {
    adj[q].push_back(r);
    adj[r].push_back(q);
  }
  std::vector<char> seen(graph.num_agents, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        stack.push_back(w);
      }
    }
  }
  return visited == graph.num_agents;
}

namespace {

CommGraph normalize_edges(int num_agents, std::vector<std::pair<int, int>> edges) {
  for (auto& [q, r] : edges) {
    if (q == r)
      throw std::invalid_argument("self-loop edge (" + std::to_string(q) + "," +
                                  std::to_string(r) + ") is not allowed");
    if (q < 0 || r < 0 || q >= num_agents || r >= num_agents)
      throw std::invalid_argument("edge (" + std::to_string(q) + "," + std::to_string(r) +
                                  ") out of range for " + std::to_string(num_agents) +
                                  " agents");
    if (q > r) std::swap(q, r);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  CommGraph graph{num_agents, std::move(edges)};
  if (!is_connected(graph))
    throw std::invalid_argument("graph with " + std::to_string(num_agents) +
                                " agents and " + std::to_string(graph.edges.size()) +
                                " edges is not connected");
  return graph;
}

}  // namespace

CommGraph build_topology(TopologyKind kind, int num_agents,
                         const std::vector<std::pair<int, int>>& custom_edges) {
  if (num_agents < 2)
    throw std::invalid_argument("topology requires at least 2 agents, got " +
                                std::to_string(num_agents));
  std::vector<std::pair<int, int>> edges;
  switch (kind) {
    case TopologyKind::Cycle:
      for (int i = 0; i < num_agents; ++i) edges.emplace_back(i, (i + 1) % num_agents);
      // Q=2 would duplicate the single edge; normalize_edges dedupes.
      break;
    case TopologyKind::Star:
      for (int i = 1; i < num_agents; ++i) edges.emplace_back(0, i);
      break;
    case TopologyKind::Complete:
      for (int q = 0; q < num_agents; ++q)
        for (int r = q + 1; r < num_agents; ++r) edges.emplace_back(q, r);
      break;
    case TopologyKind::Custom:
      edges = custom_edges;
      break;
  }
  return normalize_edges(num_agents, std::move(edges));
}

CommGraph load_edge_list(const std::string& path, int num_agents) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list file '" + path + "'");
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    int q, r;
    if (ls >> q) {
      if (!(ls >> r))
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": expected two agent indices per line");
      edges.emplace_back(q, r);
    }
  }
  return build_topology(TopologyKind::Custom, num_agents, edges);
}

MixingMatrix MixingMatrix::from_matrix(Eigen::MatrixXd w) {
  if (w.rows() != w.cols() || w.rows() < 1)
    throw std::invalid_argument("mixing matrix must be square and nonempty");
  const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12)
    throw std::invalid_argument("mixing matrix is not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");
  if (w.minCoeff() < -1e-12)
    throw std::invalid_argument("mixing matrix has negative entries");
  const double row_dev = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_dev = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
  if (row_dev > 1e-12 || col_dev > 1e-12)
    throw std::invalid_argument("mixing matrix is not doubly stochastic (max deviation " +
                                std::to_string(std::max(row_dev, col_dev)) + ")");
  return MixingMatrix{std::move(w)};
}

MixingMatrix metropolis_hastings(const CommGraph& graph) {
  if (!is_connected(graph)) throw std::invalid_argument("metropolis_hastings: graph not connected");
  const int q = graph.num_agents;
  const std::vector<int> deg = graph.degrees();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(q, q);
  for (const auto& [a, b] : graph.edges) {
    const double v = 1.0 / (1.0 + std::max(deg[a], deg[b]));
    w(a, b) = v;
    w(b, a) = v;
  }
  for (int i = 0; i < q; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return MixingMatrix::from_matrix(std::move(w));
}

double spectral_gap(const MixingMatrix& w) {
  const int q = w.size();
  if (q == 1) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w.weights, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_gap: eigensolver failed to converge");
  const auto& ev = es.eigenvalues();  // ascending
  const double second = std::max(std::abs(ev(0)), std::abs(ev(q - 2)));
  return 1.0 - second;
}

Eigen::VectorXd LiftedOperator::apply(const Eigen::VectorXd& stacked) const {
  const int q = static_cast<int>(base.rows());
  const int p = block_dim;
  if (stacked.size() != static_cast<Eigen::Index>(q) * p)
    throw std::invalid_argument("apply_lifted: vector length " +
                                std::to_string(stacked.size()) + " != " +
                                std::to_string(q) + "*" + std::to_string(p));
  Eigen::VectorXd out(static_cast<Eigen::Index>(q) * p);
  const double shift = (mode == LiftMode::ShiftedKron) ? 1.0 : 0.0;
  for (int i = 0; i < q; ++i) {
    auto dst = out.segment(static_cast<Eigen::Index>(i) * p, p);
    const double cd = base(i, i) - shift;
    // The diagonal term seeds the block; exact copy when the coefficient is 1
    // keeps identity mixing bit-transparent.
    if (cd == 1.0)
      dst = stacked.segment(static_cast<Eigen::Index>(i) * p, p);
    else if (cd == 0.0)
      dst.setZero();
    else
      dst = cd * stacked.segment(static_cast<Eigen::Index>(i) * p, p);
    for (int j = 0; j < q; ++j) {
      if (j == i) continue;
      const double c = base(i, j);
      if (c == 0.0) continue;
      dst.noalias() += c * stacked.segment(static_cast<Eigen::Index>(j) * p, p);
    }
  }
  return out;
}

Eigen::MatrixXd LiftedOperator::materialize() const {
  const int q = static_cast<int>(base.rows());
  const int p = block_dim;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q) * p,
                                              static_cast<Eigen::Index>(q) * p);
  const double shift = (mode == LiftMode::ShiftedKron) ? 1.0 : 0.0;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) {
      const double c = base(i, j) - (i == j ? shift : 0.0);
      if (c == 0.0) continue;
      out.block(static_cast<Eigen::Index>(i) * p, static_cast<Eigen::Index>(j) * p, p, p)
          .diagonal()
          .setConstant(c);
    }
  return out;
}

LiftedOperator lift(const MixingMatrix& w, int block_dim) {
  return LiftedOperator{w.weights, block_dim, LiftMode::Kron};
}

LiftedOperator lift_shifted(const MixingMatrix& w, int block_dim) {
  return LiftedOperator{w.weights, block_dim, LiftMode::ShiftedKron};
}

}  // namespace peerdyn
