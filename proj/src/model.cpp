#include "peerdyn/model.hpp"

#include <cmath>
#include <stdexcept>

#include "peerdyn/rng.hpp"

namespace peerdyn {

Activation activation_from_string(const std::string& name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + name +
                              "' (expected sigmoid|relu|identity)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

std::string to_string(ModelKind k) {
  return k == ModelKind::Affine ? "affine" : "ntk-mlp";
}

Eigen::Index ModelSpec::param_count() const {
  Eigen::Index p = 0;
  for (int l = 0; l < num_layers(); ++l)
    p += static_cast<Eigen::Index>(widths[l + 1]) * widths[l] + widths[l + 1];
  return p;
}

void ModelSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("model needs at least one layer");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("layer widths must be positive");
  if (activations.size() != widths.size() - 1)
    throw std::invalid_argument("expected one activation per layer (" +
                                std::to_string(widths.size() - 1) + "), got " +
                                std::to_string(activations.size()));
  if (activations.back() != Activation::Identity)
    throw std::invalid_argument("final activation must be identity (regression head)");
  if (kind == ModelKind::Affine) {
    if (num_layers() != 1)
      throw std::invalid_argument("affine model must have exactly one layer");
  } else {
    if (weight_std <= 0.0) throw std::invalid_argument("weight_std must be > 0");
    if (bias_std < 0.0) throw std::invalid_argument("bias_std must be >= 0");
  }
}

ModelSpec make_affine(int input_dim, int output_dim) {
  ModelSpec spec;
  spec.kind = ModelKind::Affine;
  spec.widths = {input_dim, output_dim};
  spec.activations = {Activation::Identity};
  spec.validate();
  return spec;
}

ModelSpec make_mlp(std::vector<int> widths, std::vector<Activation> activations,
                   double weight_std, double bias_std) {
  ModelSpec spec;
  spec.kind = ModelKind::NtkMlp;
  spec.widths = std::move(widths);
  spec.activations = std::move(activations);
  spec.weight_std = weight_std;
  spec.bias_std = bias_std;
  spec.validate();
  return spec;
}

ModelSpec make_mlp(std::vector<int> widths, Activation hidden, double weight_std,
                   double bias_std) {
  std::vector<Activation> acts(widths.size() - 1, hidden);
  acts.back() = Activation::Identity;
  return make_mlp(std::move(widths), std::move(acts), weight_std, bias_std);
}

namespace {

inline double act(Activation a, double z) {
  switch (a) {
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Identity: return z;
  }
  return z;
}

// Derivative in terms of the pre-activation; relu'(0) is defined as 0.
inline double act_deriv(Activation a, double z) {
  switch (a) {
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

struct LayerView {
  Eigen::Index weight_offset;
  Eigen::Index bias_offset;
  int rows;  // n_{l+1}
  int cols;  // n_l
  double weight_scale;
  double bias_scale;
};

std::vector<LayerView> layout(const ModelSpec& spec) {
  std::vector<LayerView> views;
  views.reserve(spec.num_layers());
  Eigen::Index offset = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    LayerView v;
    v.rows = spec.widths[l + 1];
    v.cols = spec.widths[l];
    v.weight_offset = offset;
    v.bias_offset = offset + static_cast<Eigen::Index>(v.rows) * v.cols;
    if (spec.kind == ModelKind::NtkMlp) {
      v.weight_scale = spec.weight_std / std::sqrt(static_cast<double>(v.cols));
      v.bias_scale = spec.bias_std;
    } else {
      v.weight_scale = 1.0;
      v.bias_scale = 1.0;
    }
    views.push_back(v);
    offset = v.bias_offset + v.rows;
  }
  return views;
}

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

RowMajorMap weight_map(const ParamVector& params, const LayerView& v) {
  return RowMajorMap(params.data() + v.weight_offset, v.rows, v.cols);
}

struct ForwardTrace {
  std::vector<Eigen::VectorXd> activations;     // x^0 .. x^L
  std::vector<Eigen::VectorXd> preactivations;  // z^0 .. z^{L-1}
};

ForwardTrace forward_trace(const ModelSpec& spec, const std::vector<LayerView>& views,
                           const ParamVector& params, const Eigen::VectorXd& x) {
  ForwardTrace trace;
  trace.activations.reserve(views.size() + 1);
  trace.preactivations.reserve(views.size());
  trace.activations.push_back(x);
  for (size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    Eigen::VectorXd z = v.weight_scale * (weight_map(params, v) * trace.activations.back());
    z.noalias() += v.bias_scale * params.segment(v.bias_offset, v.rows);
    Eigen::VectorXd out(v.rows);
    for (int i = 0; i < v.rows; ++i) out(i) = act(spec.activations[l], z(i));
    trace.preactivations.push_back(std::move(z));
    trace.activations.push_back(std::move(out));
  }
  return trace;
}

void check_dims(const ModelSpec& spec, const ParamVector& params, Eigen::Index input_dim) {
  spec.validate();
  if (params.size() != spec.param_count())
    throw std::invalid_argument("parameter vector length " + std::to_string(params.size()) +
                                " != expected " + std::to_string(spec.param_count()));
  if (input_dim != spec.input_dim())
    throw std::invalid_argument("input dimension " + std::to_string(input_dim) +
                                " != model input width " + std::to_string(spec.input_dim()));
}

}  // namespace

std::vector<LayerParams> unflatten(const ModelSpec& spec, const ParamVector& params) {
  check_dims(spec, params, spec.input_dim());
  std::vector<LayerParams> layers;
  for (const LayerView& v : layout(spec)) {
    LayerParams layer;
    layer.weights = weight_map(params, v);
    layer.biases = params.segment(v.bias_offset, v.rows);
    layers.push_back(std::move(layer));
  }
  return layers;
}

ParamVector flatten(const ModelSpec& spec, const std::vector<LayerParams>& layers) {
  spec.validate();
  if (static_cast<int>(layers.size()) != spec.num_layers())
    throw std::invalid_argument("flatten: wrong number of layers");
  ParamVector params(spec.param_count());
  const auto views = layout(spec);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerView& v = views[l];
    if (layers[l].weights.rows() != v.rows || layers[l].weights.cols() != v.cols ||
        layers[l].biases.size() != v.rows)
      throw std::invalid_argument("flatten: layer " + std::to_string(l) + " has wrong shape");
    for (int r = 0; r < v.rows; ++r)
      params.segment(v.weight_offset + static_cast<Eigen::Index>(r) * v.cols, v.cols) =
          layers[l].weights.row(r);
    params.segment(v.bias_offset, v.rows) = layers[l].biases;
  }
  return params;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ParamVector params(spec.param_count());
  for (Eigen::Index i = 0; i < params.size(); ++i) params(i) = rng.normal();
  return params;
}

Eigen::VectorXd forward(const ModelSpec& spec, const ParamVector& params,
                        const Eigen::VectorXd& x) {
  check_dims(spec, params, x.size());
  const auto views = layout(spec);
  return forward_trace(spec, views, params, x).activations.back();
}

Eigen::MatrixXd forward_batch(const ModelSpec& spec, const ParamVector& params,
                              const Eigen::MatrixXd& inputs) {
  check_dims(spec, params, inputs.cols());
  const auto views = layout(spec);
  Eigen::MatrixXd out(inputs.rows(), spec.output_dim());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    out.row(i) = forward_trace(spec, views, params, inputs.row(i).transpose())
                     .activations.back()
                     .transpose();
  return out;
}

Eigen::MatrixXd jacobian(const ModelSpec& spec, const ParamVector& params,
                         const Eigen::MatrixXd& inputs) {
  check_dims(spec, params, inputs.cols());
  const auto views = layout(spec);
  const int layers = spec.num_layers();
  const int m = spec.output_dim();
  Eigen::MatrixXd jac(inputs.rows() * m, spec.param_count());

  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const ForwardTrace trace = forward_trace(spec, views, params, inputs.row(i).transpose());
    for (int out = 0; out < m; ++out) {
      auto row = jac.row(i * m + out);
      // One backward pass per output coordinate; delta is df_out/dx^{l+1}.
      Eigen::VectorXd delta = Eigen::VectorXd::Unit(m, out);
      for (int l = layers - 1; l >= 0; --l) {
        const LayerView& v = views[l];
        Eigen::VectorXd gamma(v.rows);  // df_out/dz^l
        for (int r = 0; r < v.rows; ++r)
          gamma(r) = delta(r) * act_deriv(spec.activations[l], trace.preactivations[l](r));
        const Eigen::VectorXd& below = trace.activations[l];
        for (int r = 0; r < v.rows; ++r) {
          const double g = v.weight_scale * gamma(r);
          row.segment(v.weight_offset + static_cast<Eigen::Index>(r) * v.cols, v.cols) =
              g * below.transpose();
        }
        row.segment(v.bias_offset, v.rows) = v.bias_scale * gamma.transpose();
        if (l > 0) delta = v.weight_scale * (weight_map(params, v).transpose() * gamma);
      }
    }
  }
  return jac;
}

Eigen::MatrixXd empirical_ntk(const ModelSpec& spec, const ParamVector& params,
                              const Eigen::MatrixXd& inputs_a,
                              const Eigen::MatrixXd& inputs_b) {
  const Eigen::MatrixXd ja = jacobian(spec, params, inputs_a);
  const Eigen::MatrixXd jb = jacobian(spec, params, inputs_b);
  return ja * jb.transpose();
}

}  // namespace peerdyn
