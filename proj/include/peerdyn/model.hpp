#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace peerdyn {

enum class Activation { Sigmoid, Relu, Identity };
enum class ModelKind { Affine, NtkMlp };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);
std::string to_string(ModelKind k);

// Feed-forward architecture. For NtkMlp the effective weights are
// (weight_std / sqrt(n_l)) * trainable and biases weight bias_std * trainable,
// so every trainable entry is standard normal at init. The affine kind is a
// plain single linear layer with no scaling.
struct ModelSpec {
  ModelKind kind = ModelKind::Affine;
  std::vector<int> widths;              // n_0 .. n_L
  std::vector<Activation> activations;  // one per layer; last must be Identity
  double weight_std = 1.0;              // s_W
  double bias_std = 0.1;                // s_b

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  Eigen::Index param_count() const;
  void validate() const;  // throws std::invalid_argument on a malformed spec

  bool operator==(const ModelSpec&) const = default;
};

ModelSpec make_affine(int input_dim, int output_dim = 1);
ModelSpec make_mlp(std::vector<int> widths, std::vector<Activation> activations,
                   double weight_std = 1.0, double bias_std = 0.1);
// Hidden layers all `activation`, identity head.
ModelSpec make_mlp(std::vector<int> widths, Activation hidden = Activation::Sigmoid,
                   double weight_std = 1.0, double bias_std = 0.1);

// Flat parameter vector, laid out per layer as [weights row-major, biases].
using ParamVector = Eigen::VectorXd;

struct LayerParams {
  Eigen::MatrixXd weights;  // n_{l+1} x n_l, trainable (unscaled)
  Eigen::VectorXd biases;   // n_{l+1}
};

// The layout is a bijection: flatten(unflatten(v)) == v.
std::vector<LayerParams> unflatten(const ModelSpec& spec, const ParamVector& params);
ParamVector flatten(const ModelSpec& spec, const std::vector<LayerParams>& layers);

// Every trainable entry drawn N(0,1); identical (spec, seed) pairs give
// bit-identical vectors.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

Eigen::VectorXd forward(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::VectorXd& x);

// Inputs row per sample (D x N); returns D x M outputs.
Eigen::MatrixXd forward_batch(const ModelSpec& spec, const ParamVector& params,
                              const Eigen::MatrixXd& inputs);

// Exact reverse-mode Jacobian of the flat parameters, (M*D) x P with rows
// ordered sample-major, output-coordinate-minor.
Eigen::MatrixXd jacobian(const ModelSpec& spec, const ParamVector& params,
                         const Eigen::MatrixXd& inputs);

// J(X) * J(X')^T with the jacobian() row stacking.
Eigen::MatrixXd empirical_ntk(const ModelSpec& spec, const ParamVector& params,
                              const Eigen::MatrixXd& inputs_a,
                              const Eigen::MatrixXd& inputs_b);

}  // namespace peerdyn
