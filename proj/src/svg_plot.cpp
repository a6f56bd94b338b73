#include "peerdyn/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace peerdyn {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_loss_plot(const std::string& path, const Eigen::MatrixXd& observed,
                     const Eigen::MatrixXd& predicted, const std::string& title) {
  if (observed.size() == 0) throw std::invalid_argument("write_loss_plot: empty data");
  const int width = 840, height = 520;
  const int left = 70, right = 20, top = 40, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  const Eigen::Index steps = observed.rows();
  double lo = observed.minCoeff(), hi = observed.maxCoeff();
  if (predicted.size() > 0) {
    lo = std::min(lo, predicted.minCoeff());
    hi = std::max(hi, predicted.maxCoeff());
  }
  if (hi - lo < 1e-12) {
    hi += 1.0;
    lo -= 1.0;
  }
  const double span = hi - lo;
  lo -= 0.05 * span;
  hi += 0.05 * span;

  const auto x_at = [&](double step) {
    return left + plot_w * (steps > 1 ? step / double(steps - 1) : 0.0);
  };
  const auto y_at = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plot file '" + path + "'");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

  // Axes and ticks.
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = lo + (hi - lo) * i / 5.0;
    const double y = y_at(v);
    out << "<line x1=\"" << left - 4 << "\" y1=\"" << fmt(y) << "\" x2=\"" << left
        << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left - 8 << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v)
        << "</text>\n";
    const double s = (steps - 1) * i / 5.0;
    const double x = x_at(s);
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << top + plot_h << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << top + plot_h + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(x) << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(std::round(s)) << "</text>\n";
  }
  out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">step</text>\n";
  out << "<text x=\"18\" y=\"" << top + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 18 " << top + plot_h / 2 << ")\">loss</text>\n";

  const auto polyline = [&](const Eigen::MatrixXd& data, Eigen::Index agent, bool dashed) {
    out << "<polyline fill=\"none\" stroke=\""
        << kPalette[agent % (sizeof(kPalette) / sizeof(kPalette[0]))] << "\" stroke-width=\""
        << (dashed ? "1.4" : "1.8") << "\"";
    if (dashed) out << " stroke-dasharray=\"6,4\"";
    out << " points=\"";
    for (Eigen::Index k = 0; k < data.rows(); ++k)
      out << fmt(x_at(double(k))) << "," << fmt(y_at(data(k, agent))) << " ";
    out << "\"/>\n";
  };

  for (Eigen::Index q = 0; q < observed.cols(); ++q) polyline(observed, q, false);
  for (Eigen::Index q = 0; q < predicted.cols(); ++q) polyline(predicted, q, true);

  out << "<text x=\"" << left + plot_w - 4 << "\" y=\"" << top + 14
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << "solid: observed, dashed: predicted</text>\n";
  out << "</svg>\n";
}

}  // namespace peerdyn
