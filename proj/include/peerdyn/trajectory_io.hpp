#pragma once

#include <string>
#include <vector>

#include "peerdyn/distopt.hpp"
#include "peerdyn/flow.hpp"

namespace peerdyn {

struct LossRow {
  int step = 0;
  int agent = 0;
  double loss = 0.0;
  std::string mode;  // empty for observed rows
};

struct LossTable {
  bool has_mode = false;
  std::vector<LossRow> rows;
};

// "step,agent,loss" rows, shortest round-trip float formatting.
void write_observed_csv(const std::string& path, const TrajectoryRecord& record);

// "step,agent,loss,mode" rows with mode in {model, linearized}.
void write_predicted_csv(const std::string& path, const PredictedLosses& losses);

LossTable read_loss_csv(const std::string& path);

// Flat little-endian 64-bit floats, one row of Q*P values per step.
void write_params_bin(const std::string& path, const std::vector<Eigen::VectorXd>& states);
std::vector<Eigen::VectorXd> read_params_bin(const std::string& path, Eigen::Index row_size);

std::string format_double(double v);

}  // namespace peerdyn
