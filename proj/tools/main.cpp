// Experiment harness: simulate peer-to-peer training, predict its dynamics
// from the linearized gradient flow, compare the two, and audit stability.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "peerdyn/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

peerdyn::ExperimentConfig load(const CommonArgs& args) {
  peerdyn::ExperimentConfig cfg = peerdyn::parse_config_file(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peer-to-peer training dynamics simulator and analytic predictor"};
  app.require_subcommand(1);

  CommonArgs sim_args, pred_args, cmp_args, stab_args;
  CLI::App* simulate = app.add_subcommand("simulate", "run the discrete training rounds");
  add_common(simulate, sim_args);
  CLI::App* predict =
      app.add_subcommand("predict", "solve the linearized gradient flow and predict losses");
  add_common(predict, pred_args);
  CLI::App* compare =
      app.add_subcommand("compare", "join observed and predicted losses, report errors");
  add_common(compare, cmp_args);
  CLI::App* stability =
      app.add_subcommand("stability", "doubly-stochastic, minimality, and spectrum checks");
  add_common(stability, stab_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      peerdyn::cmd_simulate(load(sim_args), sim_args.out_dir);
      std::printf("wrote %s/observed.csv\n", sim_args.out_dir.c_str());
    } else if (predict->parsed()) {
      peerdyn::cmd_predict(load(pred_args), pred_args.out_dir);
      std::printf("wrote %s/predicted.csv\n", pred_args.out_dir.c_str());
    } else if (compare->parsed()) {
      const auto stats = peerdyn::cmd_compare(load(cmp_args), cmp_args.out_dir);
      std::printf("max relative error: model %.3e, linearized %.3e\n", stats.max_model,
                  stats.max_linearized);
      std::printf("wrote %s/compare.txt and %s/dynamics.svg\n", cmp_args.out_dir.c_str(),
                  cmp_args.out_dir.c_str());
    } else if (stability->parsed()) {
      const auto report = peerdyn::cmd_stability(load(stab_args), stab_args.out_dir);
      std::fputs(report.to_text().c_str(), stdout);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
