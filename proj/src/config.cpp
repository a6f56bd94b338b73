#include "peerdyn/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace peerdyn {

DataSource data_source_from_string(const std::string& name) {
  if (name == "synthetic") return DataSource::Synthetic;
  if (name == "half-moons") return DataSource::HalfMoons;
  if (name == "mnist") return DataSource::Mnist;
  throw std::invalid_argument("unknown data source '" + name +
                              "' (expected synthetic|half-moons|mnist)");
}

SolverMethod solver_method_from_string(const std::string& name) {
  if (name == "closed-form") return SolverMethod::ClosedForm;
  if (name == "rk4") return SolverMethod::Rk4;
  if (name == "auto") return SolverMethod::Auto;
  throw std::invalid_argument("unknown solver method '" + name +
                              "' (expected closed-form|rk4|auto)");
}

std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::Synthetic: return "synthetic";
    case DataSource::HalfMoons: return "half-moons";
    case DataSource::Mnist: return "mnist";
  }
  return "?";
}

std::string to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::ClosedForm: return "closed-form";
    case SolverMethod::Rk4: return "rk4";
    case SolverMethod::Auto: return "auto";
  }
  return "?";
}

namespace {

std::string double_to_string(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct ParseContext {
  std::string file;
  int line = 0;

  [[noreturn]] void fail(const std::string& message) const {
    throw std::runtime_error(file + ":" + std::to_string(line) + ": " + message);
  }

  double parse_double(const std::string& key, const std::string& value) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) fail("malformed number '" + value + "' for key '" + key + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("malformed number '" + value + "' for key '" + key + "'");
    }
  }

  long parse_int(const std::string& key, const std::string& value) const {
    long v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
      fail("malformed integer '" + value + "' for key '" + key + "'");
    return v;
  }

  std::uint64_t parse_u64(const std::string& key, const std::string& value) const {
    std::uint64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
      fail("malformed unsigned integer '" + value + "' for key '" + key + "'");
    return v;
  }

  bool parse_bool(const std::string& key, const std::string& value) const {
    if (value == "true") return true;
    if (value == "false") return false;
    fail("malformed boolean '" + value + "' for key '" + key + "' (expected true|false)");
  }

  std::vector<std::string> split_list(const std::string& value) const {
    std::vector<std::string> items;
    std::string item;
    std::istringstream stream(value);
    while (std::getline(stream, item, ',')) items.push_back(trim(item));
    return items;
  }
};

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& filename) {
  ExperimentConfig cfg;
  ParseContext ctx{filename, 0};
  std::string section;
  std::string raw;
  while (std::getline(in, raw)) {
    ++ctx.line;
    std::string line = raw;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') ctx.fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "data" && section != "topology" &&
          section != "training" && section != "solver")
        ctx.fail("unknown section [" + section + "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) ctx.fail("expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) ctx.fail("empty key");
    if (section.empty()) ctx.fail("key '" + key + "' appears before any [section]");

    try {
      if (section == "model") {
        if (key == "kind") {
          if (value == "affine") cfg.model_kind = ModelKind::Affine;
          else if (value == "ntk-mlp") cfg.model_kind = ModelKind::NtkMlp;
          else ctx.fail("unknown model kind '" + value + "' (expected affine|ntk-mlp)");
        } else if (key == "widths") {
          cfg.widths.clear();
          for (const auto& item : ctx.split_list(value))
            cfg.widths.push_back(static_cast<int>(ctx.parse_int(key, item)));
        } else if (key == "activations") {
          cfg.activations.clear();
          for (const auto& item : ctx.split_list(value))
            cfg.activations.push_back(activation_from_string(item));
        } else if (key == "s_w") {
          cfg.weight_std = ctx.parse_double(key, value);
        } else if (key == "s_b") {
          cfg.bias_std = ctx.parse_double(key, value);
        } else {
          ctx.fail("unknown key '" + key + "' in section [model]");
        }
      } else if (section == "data") {
        if (key == "source") cfg.source = data_source_from_string(value);
        else if (key == "images") cfg.mnist_images = value;
        else if (key == "labels") cfg.mnist_labels = value;
        else if (key == "dim") cfg.synthetic_dim = static_cast<int>(ctx.parse_int(key, value));
        else if (key == "noise_std") cfg.noise_std = ctx.parse_double(key, value);
        else if (key == "agents") cfg.num_agents = static_cast<int>(ctx.parse_int(key, value));
        else if (key == "per_agent") cfg.per_agent = static_cast<int>(ctx.parse_int(key, value));
        else if (key == "seed") cfg.seed = ctx.parse_u64(key, value);
        else ctx.fail("unknown key '" + key + "' in section [data]");
      } else if (section == "topology") {
        if (key == "kind") {
          cfg.topology = topology_kind_from_string(value);
          if (cfg.topology == TopologyKind::Custom) {
            if (!value.starts_with("custom:") || value.size() <= 7)
              ctx.fail("custom topology needs a path: custom:<path>");
            cfg.custom_edges_path = value.substr(7);
          }
        } else {
          ctx.fail("unknown key '" + key + "' in section [topology]");
        }
      } else if (section == "training") {
        if (key == "algorithm") cfg.algorithm = algorithm_from_string(value);
        else if (key == "step_size") cfg.step_size = ctx.parse_double(key, value);
        else if (key == "steps") cfg.steps = static_cast<int>(ctx.parse_int(key, value));
        else if (key == "record_params") cfg.record_params = ctx.parse_bool(key, value);
        else ctx.fail("unknown key '" + key + "' in section [training]");
      } else if (section == "solver") {
        if (key == "method") cfg.solver = solver_method_from_string(value);
        else if (key == "rk4_dt") cfg.rk4_dt = ctx.parse_double(key, value);
        else if (key == "dense_cap") cfg.dense_cap = ctx.parse_int(key, value);
        else ctx.fail("unknown key '" + key + "' in section [solver]");
      }
    } catch (const std::invalid_argument& err) {
      ctx.fail(err.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

void ExperimentConfig::validate() const {
  if (step_size <= 0.0) throw std::runtime_error("config: step_size must be > 0");
  if (steps < 1) throw std::runtime_error("config: steps must be >= 1");
  if (num_agents < 2) throw std::runtime_error("config: agents must be >= 2");
  if (per_agent < 1) throw std::runtime_error("config: per_agent must be >= 1");
  if (synthetic_dim < 1) throw std::runtime_error("config: dim must be >= 1");
  if (noise_std < 0.0) throw std::runtime_error("config: noise_std must be >= 0");
  if (weight_std <= 0.0) throw std::runtime_error("config: s_w must be > 0");
  if (bias_std < 0.0) throw std::runtime_error("config: s_b must be >= 0");
  if (rk4_dt <= 0.0) throw std::runtime_error("config: rk4_dt must be > 0");
  if (dense_cap < 1) throw std::runtime_error("config: dense_cap must be >= 1");
  if (model_kind == ModelKind::Affine) {
    if (!widths.empty())
      throw std::runtime_error("config: widths are inferred for kind=affine; remove the key");
    if (!activations.empty())
      throw std::runtime_error("config: activations are fixed for kind=affine; remove the key");
  } else {
    if (widths.size() < 2)
      throw std::runtime_error("config: kind=ntk-mlp requires widths with >= 2 entries");
    for (int w : widths)
      if (w <= 0) throw std::runtime_error("config: widths must be positive");
    if (!activations.empty() && activations.size() != widths.size() - 1)
      throw std::runtime_error("config: expected " + std::to_string(widths.size() - 1) +
                               " activations, got " + std::to_string(activations.size()));
    if (!activations.empty() && activations.back() != Activation::Identity)
      throw std::runtime_error("config: final activation must be identity");
  }
  if (source == DataSource::Mnist && (mnist_images.empty() || mnist_labels.empty()))
    throw std::runtime_error("config: source=mnist requires images and labels paths");
  if (topology == TopologyKind::Custom && custom_edges_path.empty())
    throw std::runtime_error("config: custom topology requires custom:<path>");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  out << "[model]\n";
  out << "kind = " << to_string(model_kind) << "\n";
  if (model_kind == ModelKind::NtkMlp) {
    out << "widths = ";
    for (std::size_t i = 0; i < widths.size(); ++i)
      out << (i ? "," : "") << widths[i];
    out << "\n";
    if (!activations.empty()) {
      out << "activations = ";
      for (std::size_t i = 0; i < activations.size(); ++i)
        out << (i ? "," : "") << to_string(activations[i]);
      out << "\n";
    }
  }
  out << "s_w = " << double_to_string(weight_std) << "\n";
  out << "s_b = " << double_to_string(bias_std) << "\n";
  out << "\n[data]\n";
  out << "source = " << to_string(source) << "\n";
  if (!mnist_images.empty()) out << "images = " << mnist_images << "\n";
  if (!mnist_labels.empty()) out << "labels = " << mnist_labels << "\n";
  out << "dim = " << synthetic_dim << "\n";
  out << "noise_std = " << double_to_string(noise_std) << "\n";
  out << "agents = " << num_agents << "\n";
  out << "per_agent = " << per_agent << "\n";
  out << "seed = " << seed << "\n";
  out << "\n[topology]\n";
  if (topology == TopologyKind::Custom)
    out << "kind = custom:" << custom_edges_path << "\n";
  else
    out << "kind = " << to_string(topology) << "\n";
  out << "\n[training]\n";
  out << "algorithm = " << to_string(algorithm) << "\n";
  out << "step_size = " << double_to_string(step_size) << "\n";
  out << "steps = " << steps << "\n";
  out << "record_params = " << (record_params ? "true" : "false") << "\n";
  out << "\n[solver]\n";
  out << "method = " << to_string(solver) << "\n";
  out << "rk4_dt = " << double_to_string(rk4_dt) << "\n";
  out << "dense_cap = " << dense_cap << "\n";
  return out.str();
}

}  // namespace peerdyn
