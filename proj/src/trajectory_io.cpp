#include "peerdyn/trajectory_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace peerdyn {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write file '" + path + "'");
  return out;
}

double parse_double_field(const std::string& path, int line, const std::string& field) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw std::runtime_error(path + ":" + std::to_string(line) + ": malformed number '" +
                             field + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

void write_observed_csv(const std::string& path, const TrajectoryRecord& record) {
  auto out = open_out(path);
  out << "step,agent,loss\n";
  for (Eigen::Index k = 0; k < record.losses.rows(); ++k)
    for (Eigen::Index q = 0; q < record.losses.cols(); ++q)
      out << k << ',' << q << ',' << format_double(record.losses(k, q)) << '\n';
}

void write_predicted_csv(const std::string& path, const PredictedLosses& losses) {
  auto out = open_out(path);
  out << "step,agent,loss,mode\n";
  for (Eigen::Index k = 0; k < losses.model.rows(); ++k)
    for (Eigen::Index q = 0; q < losses.model.cols(); ++q) {
      out << k << ',' << q << ',' << format_double(losses.model(k, q)) << ",model\n";
      out << k << ',' << q << ',' << format_double(losses.linearized(k, q))
          << ",linearized\n";
    }
}

LossTable read_loss_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty CSV file");
  LossTable table;
  if (line == "step,agent,loss")
    table.has_mode = false;
  else if (line == "step,agent,loss,mode")
    table.has_mode = true;
  else
    throw std::runtime_error(path + ":1: unexpected CSV header '" + line + "'");

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    const std::size_t expected = table.has_mode ? 4 : 3;
    if (fields.size() != expected)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(expected) + " fields");
    LossRow row;
    row.step = static_cast<int>(parse_double_field(path, lineno, fields[0]));
    row.agent = static_cast<int>(parse_double_field(path, lineno, fields[1]));
    row.loss = parse_double_field(path, lineno, fields[2]);
    if (table.has_mode) row.mode = fields[3];
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_params_bin(const std::string& path, const std::vector<Eigen::VectorXd>& states) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  for (const auto& state : states) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(state.data()),
                static_cast<std::streamsize>(state.size() * sizeof(double)));
    } else {
      for (Eigen::Index i = 0; i < state.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(state(i));
        bits = __builtin_bswap64(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
      }
    }
  }
}

std::vector<Eigen::VectorXd> read_params_bin(const std::string& path, Eigen::Index row_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file '" + path + "'");
  std::vector<Eigen::VectorXd> states;
  while (true) {
    Eigen::VectorXd row(row_size);
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row_size * sizeof(double)));
    if (in.gcount() == 0) break;
    if (in.gcount() != static_cast<std::streamsize>(row_size * sizeof(double)))
      throw std::runtime_error(path + ": truncated parameter dump");
    if constexpr (std::endian::native != std::endian::little) {
      for (Eigen::Index i = 0; i < row.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(row(i));
        row(i) = std::bit_cast<double>(__builtin_bswap64(bits));
      }
    }
    states.push_back(std::move(row));
  }
  return states;
}

}  // namespace peerdyn
