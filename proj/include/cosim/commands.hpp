#pragma once

#include <ostream>
#include <string>

#include "cosim/config.hpp"
#include "cosim/trace_io.hpp"

namespace cosim {

/// Builds the configured system and runs the co-simulation master on it.
SimulationTrace run_configured(const RunConfig& cfg);

/// run_configured plus sampling into a trace table with the config echoed
/// into the header.
TraceTable run_to_table(const RunConfig& cfg);

/// Convergence sweep over cfg.H_list against the model's reference solution
/// (or a tightly integrated monolithic fallback). Returns the rendered CSV:
/// config header, `H,error,err_x_*` rows, `# slope = ...` footer.
std::string converge_csv(const RunConfig& cfg);

/// Long-run energy record at the exchange points. Returns the rendered CSV:
/// config header, `t,E,production` rows, drift/production footers and the
/// guard-span trailer lines.
std::string stability_csv(const RunConfig& cfg);

/// Subcommand drivers shared by the CLI and the test binaries. Each writes
/// cfg.out, prints a one-line summary to `log`, reports failures on `err`
/// and returns a process exit code. A failure never leaves a partial output
/// file behind.
int cmd_run(const RunConfig& cfg, std::ostream& log, std::ostream& err);
int cmd_converge(const RunConfig& cfg, std::ostream& log, std::ostream& err);
int cmd_stability(const RunConfig& cfg, std::ostream& log, std::ostream& err);

}  // namespace cosim
