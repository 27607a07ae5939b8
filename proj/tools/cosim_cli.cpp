#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cosim/commands.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::string model, scheme, method, out;
  int extrap = -1;
  bool hermite = false;
  double H = 0.0, t_end = 0.0;

  void add_common(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file with key = value lines");
    cmd->add_option("--model", model,
                    "spring-mass | linear-uni | linear-mutual | gradient-flow");
    cmd->add_option("--scheme", scheme, "plain | balance-corrected | power-negotiated");
    cmd->add_option("--extrap", extrap, "input hold degree, 0 or 1")
        ->check(CLI::Range(0, 1));
    cmd->add_flag("--hermite", hermite, "degree-1 hold from value + derivative");
    cmd->add_option("--H", H, "exchange step")->check(CLI::PositiveNumber);
    cmd->add_option("--t-end", t_end, "simulated span")->check(CLI::PositiveNumber);
    cmd->add_option("--method", method,
                    "adaptive-rk54 | fixed-rk4 | implicit-trapezoidal");
    cmd->add_option("--out", out, "output file path");
  }

  // file values first, CLI flags override
  cosim::RunConfig resolve(const CLI::App* cmd) const {
    cosim::RunConfig cfg;
    if (!config_path.empty()) cfg = cosim::parse_config_file(config_path);
    if (cmd->count("--model")) cfg.model = model;
    if (cmd->count("--scheme")) cfg.scheme = scheme;
    if (cmd->count("--extrap")) cfg.extrap = extrap;
    if (cmd->count("--hermite")) cfg.hermite = hermite;
    if (cmd->count("--H")) cfg.H = H;
    if (cmd->count("--t-end")) cfg.t_end = t_end;
    if (cmd->count("--method")) cfg.method = method;
    if (cmd->count("--out")) cfg.out = out;
    cosim::finalize_config(cfg);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-simulation master for coupled ODE subsystems"};
  app.require_subcommand(1);

  CliOverrides run_opts, conv_opts, stab_opts;
  CLI::App* run = app.add_subcommand("run", "simulate and write a state/energy trace");
  run_opts.add_common(run);
  CLI::App* conv = app.add_subcommand("converge", "sweep the exchange step and fit the error order");
  conv_opts.add_common(conv);
  CLI::App* stab = app.add_subcommand("stability", "record long-run energy at the exchange points");
  stab_opts.add_common(stab);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cosim::cmd_run(run_opts.resolve(run), std::cout, std::cerr);
    if (conv->parsed()) return cosim::cmd_converge(conv_opts.resolve(conv), std::cout, std::cerr);
    return cosim::cmd_stability(stab_opts.resolve(stab), std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
