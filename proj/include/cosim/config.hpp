#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cosim/coupling.hpp"
#include "cosim/models.hpp"

namespace cosim {

// Raised for malformed or inconsistent run configurations. The message names
// the offending file, line and key where possible.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat run description, filled from `key = value` text and/or CLI flags.
// Every field has a working default so an empty file is a valid config.
struct RunConfig {
  std::string model = "spring-mass";  // spring-mass | linear-uni | linear-mutual | gradient-flow
  std::string scheme = "plain";       // plain | balance-corrected | power-negotiated
  int extrap = 0;                     // extrapolation degree, 0 or 1
  bool hermite = false;               // degree-1 extrapolation from value + derivative
  double H = 0.2;                     // exchange step
  double t_end = 20.0;
  std::string method = "adaptive-rk54";  // fixed-rk4 | implicit-trapezoidal
  double abs_tol = 1e-12;
  double rel_tol = 0.0;
  double initial_step = 0.0;  // required > 0 for fixed-step methods
  double max_step = 0.0;      // <= 0 means unlimited
  double inversion_eps = 1e-6;
  double sample_dt = 0.0;  // <= 0 means H / 10
  bool parallel = false;
  std::string out = "trace.csv";
  std::vector<double> H_list = {0.2, 0.1, 0.05, 0.025, 0.0125};

  // spring-mass parameters
  double m = 1.0;
  double c = 1.0;
  double d = 0.0;
  double x0 = 1.0;
  double v0 = 0.0;

  // linear 2x2 parameters; NaN entries are resolved to the variant's defaults
  double a11 = kUnsetEntry;
  double a12 = kUnsetEntry;
  double a21 = kUnsetEntry;
  double a22 = kUnsetEntry;
  double x1_0 = 1.0;
  double x2_0 = 1.0;

  static constexpr double kUnsetEntry = -9.99e99;
};

// Applies one `key = value` assignment. `where` prefixes error messages
// (e.g. "run.cfg:12"). Unknown keys and unparsable values throw ConfigError.
void apply_config_value(RunConfig& cfg, const std::string& key,
                        const std::string& value, const std::string& where);

// Parses line-oriented `key = value` text. `#` starts a comment, blank lines
// are skipped. Does not validate cross-field consistency; call
// finalize_config afterwards.
RunConfig parse_config_text(const std::string& text, const std::string& origin);

RunConfig parse_config_file(const std::string& path);

// Resolves placeholder matrix entries and checks cross-field consistency
// (known names, positive steps, hermite implies degree 1, scheme/model
// compatibility, exchange grid hitting t_end).
void finalize_config(RunConfig& cfg);

// Full effective configuration as ordered key/value pairs, suitable for
// echoing into output headers. Values are rendered exactly as the parser
// would accept them back.
std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg);

MasterConfig to_master_config(const RunConfig& cfg);

// Instantiates the configured model. Throws ConfigError for unknown names.
CoupledSystem build_configured_system(const RunConfig& cfg);

// Round-trippable decimal rendering of a double (%.17g).
std::string format_double(double v);

}  // namespace cosim
