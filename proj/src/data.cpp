#include "peerdyn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "peerdyn/rng.hpp"

namespace peerdyn {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

class IdxReader {
 public:
  explicit IdxReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open IDX file '" + path + "'");
  }

  std::uint32_t read_u32() {
    std::uint8_t b[4];
    read_bytes(b, 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
  }

  void read_bytes(std::uint8_t* dst, std::size_t n) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw std::runtime_error(path_ + ": truncated IDX file at byte offset " +
                               std::to_string(offset_ + in_.gcount()));
    offset_ += n;
  }

  void expect_magic(std::uint32_t expected) {
    const std::uint32_t found = read_u32();
    if (found != expected)
      throw std::runtime_error(path_ + ": bad IDX magic at byte offset 0: expected " +
                               hex32(expected) + ", found " + hex32(found));
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

void write_u32(std::ofstream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8),
                             std::uint8_t(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
  IdxReader reader(path);
  reader.expect_magic(kImagesMagic);
  IdxImages images;
  images.count = static_cast<int>(reader.read_u32());
  images.rows = static_cast<int>(reader.read_u32());
  images.cols = static_cast<int>(reader.read_u32());
  if (images.count < 0 || images.rows <= 0 || images.cols <= 0)
    throw std::runtime_error(path + ": implausible IDX dimensions");
  images.pixels.resize(static_cast<std::size_t>(images.count) * images.rows * images.cols);
  if (!images.pixels.empty()) reader.read_bytes(images.pixels.data(), images.pixels.size());
  return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  IdxReader reader(path);
  reader.expect_magic(kLabelsMagic);
  const auto count = reader.read_u32();
  std::vector<std::uint8_t> labels(count);
  if (count > 0) reader.read_bytes(labels.data(), labels.size());
  return labels;
}

void write_idx_images(const std::string& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write IDX file '" + path + "'");
  write_u32(out, kImagesMagic);
  write_u32(out, static_cast<std::uint32_t>(images.count));
  write_u32(out, static_cast<std::uint32_t>(images.rows));
  write_u32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write IDX file '" + path + "'");
  write_u32(out, kLabelsMagic);
  write_u32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                              const std::vector<int>& keep_digits) {
  const IdxImages images = read_idx_images(images_path);
  const std::vector<std::uint8_t> labels = read_idx_labels(labels_path);
  if (static_cast<int>(labels.size()) != images.count)
    throw std::runtime_error("IDX count mismatch: " + std::to_string(images.count) +
                             " images vs " + std::to_string(labels.size()) + " labels");
  const int pixels_per = images.rows * images.cols;
  std::vector<int> kept;
  for (int i = 0; i < images.count; ++i)
    if (std::find(keep_digits.begin(), keep_digits.end(), labels[i]) != keep_digits.end())
      kept.push_back(i);

  LabeledDataset out;
  out.inputs.resize(static_cast<Eigen::Index>(kept.size()), pixels_per);
  out.targets.resize(static_cast<Eigen::Index>(kept.size()), 1);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::uint8_t* px = images.pixels.data() + static_cast<std::size_t>(kept[k]) * pixels_per;
    for (int j = 0; j < pixels_per; ++j) out.inputs(k, j) = px[j] / 255.0;
    out.targets(k, 0) = static_cast<double>(labels[kept[k]]);
  }
  return out;
}

LabeledDataset half_moons(int n, double noise_std, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("half_moons needs at least 2 samples");
  if (noise_std < 0.0) throw std::invalid_argument("noise_std must be >= 0");
  Rng rng(seed);
  LabeledDataset out;
  out.inputs.resize(n, 2);
  out.targets.resize(n, 1);
  const int n0 = n / 2;
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, std::numbers::pi);
    double x0, x1;
    if (i < n0) {
      x0 = std::cos(t);
      x1 = std::sin(t);
      out.targets(i, 0) = 0.0;
    } else {
      x0 = 1.0 - std::cos(t);
      x1 = 0.5 - std::sin(t);
      out.targets(i, 0) = 1.0;
    }
    out.inputs(i, 0) = x0 + noise_std * rng.normal();
    out.inputs(i, 1) = x1 + noise_std * rng.normal();
  }
  return out;
}

LabeledDataset gaussian_blobs(int n, int dim, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gaussian_blobs needs at least 2 samples");
  if (dim < 1) throw std::invalid_argument("gaussian_blobs needs dim >= 1");
  Rng rng(seed);
  LabeledDataset out;
  out.inputs.resize(n, dim);
  out.targets.resize(n, 1);
  const int n0 = n / 2;
  for (int i = 0; i < n; ++i) {
    const double center = i < n0 ? 0.25 : 0.75;
    for (int j = 0; j < dim; ++j) out.inputs(i, j) = center + 0.15 * rng.normal();
    out.targets(i, 0) = i < n0 ? 0.0 : 1.0;
  }
  return out;
}

void AgentData::validate() const {
  if (agents.empty()) throw std::invalid_argument("AgentData has no agents");
  const Eigen::Index d = agents.front().count();
  const int n = agents.front().input_dim();
  const int m = agents.front().target_dim();
  for (const auto& a : agents)
    if (a.count() != d || a.input_dim() != n || a.target_dim() != m)
      throw std::invalid_argument("agents must share dataset size and dimensions");
  if (d == 0) throw std::invalid_argument("agents have empty datasets");
}

AgentData split_iid(const LabeledDataset& source, int num_agents, int per_agent,
                    std::uint64_t seed) {
  if (source.count() == 0) throw std::invalid_argument("split_iid: empty source dataset");
  if (num_agents < 1 || per_agent < 1)
    throw std::invalid_argument("split_iid: need at least one agent and one sample");
  const Eigen::Index total = source.count();
  const Eigen::Index need = static_cast<Eigen::Index>(num_agents) * per_agent;
  Rng rng(seed);

  std::vector<Eigen::Index> picks(need);
  if (need <= total) {
    // Partial Fisher-Yates: disjoint shards.
    std::vector<Eigen::Index> pool(total);
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < need; ++i) {
      const Eigen::Index j = i + static_cast<Eigen::Index>(rng.integer(total - i));
      std::swap(pool[i], pool[j]);
      picks[i] = pool[i];
    }
  } else {
    for (Eigen::Index i = 0; i < need; ++i)
      picks[i] = static_cast<Eigen::Index>(rng.integer(total));
  }

  AgentData out;
  out.agents.resize(num_agents);
  for (int q = 0; q < num_agents; ++q) {
    LabeledDataset& shard = out.agents[q];
    shard.inputs.resize(per_agent, source.inputs.cols());
    shard.targets.resize(per_agent, source.targets.cols());
    for (int i = 0; i < per_agent; ++i) {
      const Eigen::Index src = picks[static_cast<Eigen::Index>(q) * per_agent + i];
      shard.inputs.row(i) = source.inputs.row(src);
      shard.targets.row(i) = source.targets.row(src);
    }
  }
  out.validate();
  return out;
}

Eigen::VectorXd stack_targets(const AgentData& data) {
  data.validate();
  const int q = data.num_agents();
  const Eigen::Index d = data.samples_per_agent();
  const Eigen::Index m = data.target_dim();
  Eigen::VectorXd y(q * m * d);
  Eigen::Index pos = 0;
  for (int a = 0; a < q; ++a)
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < m; ++j) y(pos++) = data.agents[a].targets(i, j);
  return y;
}

}  // namespace peerdyn
