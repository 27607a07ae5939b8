#include "cosim/config.hpp"

#include "cosim/version.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cosim {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double_value(const std::string& value, const std::string& where,
                          const std::string& key) {
  const std::string v = trim(value);
  if (!v.empty()) {
    const char* begin = v.c_str();
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(begin, &end);
    if (end == begin + v.size() && errno == 0) return d;
  }
  throw ConfigError(where + ": key '" + key + "' expects a number, got '" +
                    value + "'");
}

int parse_int_value(const std::string& value, const std::string& where,
                    const std::string& key) {
  const std::string v = trim(value);
  if (!v.empty()) {
    const char* begin = v.c_str();
    char* end = nullptr;
    errno = 0;
    const long n = std::strtol(begin, &end, 10);
    if (end == begin + v.size() && errno == 0) return static_cast<int>(n);
  }
  throw ConfigError(where + ": key '" + key + "' expects an integer, got '" +
                    value + "'");
}

bool parse_bool_value(const std::string& value, const std::string& where,
                      const std::string& key) {
  const std::string v = trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(where + ": key '" + key +
                    "' expects true/false, got '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& value,
                                      const std::string& where,
                                      const std::string& key) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    out.push_back(parse_double_value(item, where, key));
  }
  if (out.empty()) {
    throw ConfigError(where + ": key '" + key + "' expects a comma-separated list");
  }
  return out;
}

bool is_unset(double v) { return v == RunConfig::kUnsetEntry; }

// Names like schemes and methods are accepted in both spellings
// ("power_negotiated" and "power-negotiated"); canonical form uses hyphens.
std::string normalize_name(const std::string& value) {
  std::string v = trim(value);
  for (char& ch : v) {
    if (ch == '_') ch = '-';
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void apply_config_value(RunConfig& cfg, const std::string& key,
                        const std::string& value, const std::string& where) {
  if (key == "model") cfg.model = normalize_name(value);
  else if (key == "scheme") cfg.scheme = normalize_name(value);
  else if (key == "extrap") cfg.extrap = parse_int_value(value, where, key);
  else if (key == "hermite") cfg.hermite = parse_bool_value(value, where, key);
  else if (key == "H") cfg.H = parse_double_value(value, where, key);
  else if (key == "t_end") cfg.t_end = parse_double_value(value, where, key);
  else if (key == "method") cfg.method = normalize_name(value);
  else if (key == "abs_tol") cfg.abs_tol = parse_double_value(value, where, key);
  else if (key == "rel_tol") cfg.rel_tol = parse_double_value(value, where, key);
  else if (key == "initial_step") cfg.initial_step = parse_double_value(value, where, key);
  else if (key == "max_step") cfg.max_step = parse_double_value(value, where, key);
  else if (key == "inversion_eps") cfg.inversion_eps = parse_double_value(value, where, key);
  else if (key == "sample_dt") cfg.sample_dt = parse_double_value(value, where, key);
  else if (key == "parallel") cfg.parallel = parse_bool_value(value, where, key);
  else if (key == "out") cfg.out = trim(value);
  else if (key == "H_list") cfg.H_list = parse_double_list(value, where, key);
  else if (key == "m") cfg.m = parse_double_value(value, where, key);
  else if (key == "c") cfg.c = parse_double_value(value, where, key);
  else if (key == "d") cfg.d = parse_double_value(value, where, key);
  else if (key == "x0") cfg.x0 = parse_double_value(value, where, key);
  else if (key == "v0") cfg.v0 = parse_double_value(value, where, key);
  else if (key == "a11") cfg.a11 = parse_double_value(value, where, key);
  else if (key == "a12") cfg.a12 = parse_double_value(value, where, key);
  else if (key == "a21") cfg.a21 = parse_double_value(value, where, key);
  else if (key == "a22") cfg.a22 = parse_double_value(value, where, key);
  else if (key == "x1_0") cfg.x1_0 = parse_double_value(value, where, key);
  else if (key == "x2_0") cfg.x2_0 = parse_double_value(value, where, key);
  else {
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    apply_config_value(cfg, key, value, where);
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void finalize_config(RunConfig& cfg) {
  if (cfg.model != "spring-mass" && cfg.model != "linear-uni" &&
      cfg.model != "linear-mutual" && cfg.model != "gradient-flow") {
    throw ConfigError("unknown model '" + cfg.model +
                      "' (expected spring-mass, linear-uni, linear-mutual or gradient-flow)");
  }
  if (cfg.scheme != "plain" && cfg.scheme != "balance-corrected" &&
      cfg.scheme != "power-negotiated") {
    throw ConfigError("unknown scheme '" + cfg.scheme +
                      "' (expected plain, balance-corrected or power-negotiated)");
  }
  if (cfg.method != "adaptive-rk54" && cfg.method != "fixed-rk4" &&
      cfg.method != "implicit-trapezoidal") {
    throw ConfigError("unknown method '" + cfg.method +
                      "' (expected adaptive-rk54, fixed-rk4 or implicit-trapezoidal)");
  }
  if (cfg.extrap != 0 && cfg.extrap != 1) {
    throw ConfigError("extrap must be 0 or 1");
  }
  if (cfg.hermite && cfg.extrap != 1) {
    throw ConfigError("hermite requires extrap = 1");
  }
  if (!(cfg.H > 0.0)) throw ConfigError("H must be positive");
  if (!(cfg.t_end > 0.0)) throw ConfigError("t_end must be positive");
  const double ratio = cfg.t_end / cfg.H;
  if (std::abs(ratio - std::round(ratio)) > 1e-8 * std::max(1.0, ratio)) {
    throw ConfigError("t_end must be an integer multiple of H");
  }
  if (cfg.abs_tol < 0.0 || cfg.rel_tol < 0.0) {
    throw ConfigError("tolerances must be non-negative");
  }
  if (cfg.method == "adaptive-rk54" && cfg.abs_tol == 0.0 && cfg.rel_tol == 0.0) {
    throw ConfigError("adaptive-rk54 needs abs_tol or rel_tol > 0");
  }
  if (cfg.method != "adaptive-rk54" && !(cfg.initial_step > 0.0)) {
    throw ConfigError("fixed-step methods need initial_step > 0");
  }
  if (!(cfg.inversion_eps > 0.0)) throw ConfigError("inversion_eps must be positive");
  if (cfg.sample_dt < 0.0) throw ConfigError("sample_dt must be >= 0");
  for (double h : cfg.H_list) {
    if (!(h > 0.0)) throw ConfigError("H_list entries must be positive");
  }
  if (!(cfg.m > 0.0)) throw ConfigError("m must be positive");
  if (!(cfg.c > 0.0)) throw ConfigError("c must be positive");
  if (cfg.d < 0.0) throw ConfigError("d must be >= 0");

  // The two linear variants differ only in their default matrix.
  const bool mutual = (cfg.model == "linear-mutual");
  if (is_unset(cfg.a11)) cfg.a11 = mutual ? 0.0 : -1.0;
  if (is_unset(cfg.a12)) cfg.a12 = mutual ? 1.0 : 0.0;
  if (is_unset(cfg.a21)) cfg.a21 = mutual ? -1.0 : 1.0;
  if (is_unset(cfg.a22)) cfg.a22 = mutual ? 0.0 : -1.0;

  if (cfg.scheme == "power-negotiated" &&
      (cfg.model == "linear-uni" || cfg.model == "linear-mutual")) {
    throw ConfigError("scheme power-negotiated is not available for the linear models; "
                      "they expose no boundary power maps");
  }
}

std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("version", kVersion);
  kv.emplace_back("model", cfg.model);
  kv.emplace_back("scheme", cfg.scheme);
  kv.emplace_back("extrap", std::to_string(cfg.extrap));
  kv.emplace_back("hermite", cfg.hermite ? "true" : "false");
  kv.emplace_back("H", format_double(cfg.H));
  kv.emplace_back("t_end", format_double(cfg.t_end));
  kv.emplace_back("method", cfg.method);
  kv.emplace_back("abs_tol", format_double(cfg.abs_tol));
  kv.emplace_back("rel_tol", format_double(cfg.rel_tol));
  kv.emplace_back("initial_step", format_double(cfg.initial_step));
  kv.emplace_back("max_step", format_double(cfg.max_step));
  kv.emplace_back("inversion_eps", format_double(cfg.inversion_eps));
  kv.emplace_back("sample_dt", format_double(cfg.sample_dt));
  kv.emplace_back("parallel", cfg.parallel ? "true" : "false");
  kv.emplace_back("out", cfg.out);
  std::string hs;
  for (std::size_t i = 0; i < cfg.H_list.size(); ++i) {
    if (i) hs += ",";
    hs += format_double(cfg.H_list[i]);
  }
  kv.emplace_back("H_list", hs);
  kv.emplace_back("m", format_double(cfg.m));
  kv.emplace_back("c", format_double(cfg.c));
  kv.emplace_back("d", format_double(cfg.d));
  kv.emplace_back("x0", format_double(cfg.x0));
  kv.emplace_back("v0", format_double(cfg.v0));
  kv.emplace_back("a11", format_double(cfg.a11));
  kv.emplace_back("a12", format_double(cfg.a12));
  kv.emplace_back("a21", format_double(cfg.a21));
  kv.emplace_back("a22", format_double(cfg.a22));
  kv.emplace_back("x1_0", format_double(cfg.x1_0));
  kv.emplace_back("x2_0", format_double(cfg.x2_0));
  return kv;
}

MasterConfig to_master_config(const RunConfig& cfg) {
  MasterConfig mc;
  if (cfg.scheme == "plain") mc.scheme = Scheme::Plain;
  else if (cfg.scheme == "balance-corrected") mc.scheme = Scheme::BalanceCorrected;
  else mc.scheme = Scheme::PowerNegotiated;
  mc.extrap_degree = cfg.extrap;
  mc.hermite = cfg.hermite;
  mc.t0 = 0.0;
  mc.t_end = cfg.t_end;
  mc.H = cfg.H;
  if (cfg.method == "adaptive-rk54") mc.integrator.method = IntegratorMethod::AdaptiveRK54;
  else if (cfg.method == "fixed-rk4") mc.integrator.method = IntegratorMethod::FixedRK4;
  else mc.integrator.method = IntegratorMethod::ImplicitTrapezoidal;
  mc.integrator.abs_tol = cfg.abs_tol;
  mc.integrator.rel_tol = cfg.rel_tol;
  mc.integrator.initial_step = cfg.initial_step;
  mc.integrator.max_step = cfg.max_step;
  mc.inversion_eps = cfg.inversion_eps;
  mc.sample_dt = cfg.sample_dt;
  mc.parallel_blocks = cfg.parallel;
  return mc;
}

CoupledSystem build_configured_system(const RunConfig& cfg) {
  SpringMassModel sm;
  sm.mass = cfg.m;
  sm.stiffness = cfg.c;
  sm.damping = cfg.d;
  sm.x0 = cfg.x0;
  sm.v0 = cfg.v0;
  LinearCoupledModel lin;
  lin.A = Mat(2, 2);
  lin.A(0, 0) = cfg.a11;
  lin.A(0, 1) = cfg.a12;
  lin.A(1, 0) = cfg.a21;
  lin.A(1, 1) = cfg.a22;
  lin.x0 = {cfg.x1_0, cfg.x2_0};
  try {
    return make_named_system(cfg.model, sm, lin);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace cosim
