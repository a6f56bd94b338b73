#pragma once

#include <Eigen/Dense>
#include <string>

namespace peerdyn {

// Static vector graphic of the loss dynamics: one solid polyline per agent
// for the observed curves and a dashed one per agent for the predicted
// curves, sharing the agent color. Rows are steps, columns agents.
void write_loss_plot(const std::string& path, const Eigen::MatrixXd& observed,
                     const Eigen::MatrixXd& predicted, const std::string& title);

}  // namespace peerdyn
