#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cosim/commands.hpp"
#include "cosim/config.hpp"
#include "cosim/trace_io.hpp"
#include "doctest.h"

using namespace cosim;

namespace {

RunConfig parsed(const std::string& text) {
    RunConfig cfg = parse_config_text(text, "test");
    finalize_config(cfg);
    return cfg;
}

std::string echo_as_text(const RunConfig& cfg) {
    std::string text;
    for (const auto& [k, v] : config_echo(cfg)) {
        if (k == "version") continue;  // informational, not a config key
        text += k + " = " + v + "\n";
    }
    return text;
}

std::filesystem::path temp_file(const char* stem) {
    return std::filesystem::temp_directory_path() /
           (std::string(stem) + "-" + std::to_string(std::rand()) + ".csv");
}

}  // namespace

TEST_CASE("an empty config file yields the documented defaults") {
    const RunConfig cfg = parsed("");
    CHECK(cfg.model == "spring-mass");
    CHECK(cfg.scheme == "plain");
    CHECK(cfg.extrap == 0);
    CHECK(cfg.hermite == false);
    CHECK(cfg.H == 0.2);
    CHECK(cfg.t_end == 20.0);
    CHECK(cfg.method == "adaptive-rk54");
    CHECK(cfg.abs_tol == 1e-12);
    CHECK(cfg.inversion_eps == 1e-6);
    CHECK(cfg.H_list.size() == 5);
    // the linear-matrix placeholders resolve to the variant defaults
    CHECK(cfg.a11 == -1.0);
    CHECK(cfg.a12 == 0.0);
    CHECK(cfg.a21 == 1.0);
    CHECK(cfg.a22 == -1.0);
}

TEST_CASE("names are accepted with underscores and normalized to hyphens") {
    const RunConfig cfg =
        parsed("scheme = power_negotiated\nH = 0.2\nt_end = 75\nmodel = spring-mass\n");
    CHECK(cfg.scheme == "power-negotiated");
    CHECK(cfg.H == 0.2);
    CHECK(cfg.t_end == 75.0);
    CHECK(parsed("model = linear_uni\nscheme = balance_corrected\n").model == "linear-uni");
    CHECK(parsed("method = FIXED_RK4\ninitial_step = 0.01\n").method == "fixed-rk4");
}

TEST_CASE("comments, blank lines and inline notes are ignored") {
    const RunConfig cfg = parsed("# a full-line comment\n"
                                 "\n"
                                 "H = 0.1   # an inline note\n"
                                 "  t_end   =   10\n");
    CHECK(cfg.H == 0.1);
    CHECK(cfg.t_end == 10.0);
}

TEST_CASE("config errors name the file, line and offending key") {
    CHECK_THROWS_WITH_AS((void)parse_config_text("mystery = 3\n", "run.cfg"),
                         doctest::Contains("run.cfg:1"), ConfigError);
    CHECK_THROWS_WITH_AS((void)parse_config_text("mystery = 3\n", "run.cfg"),
                         doctest::Contains("mystery"), ConfigError);
    CHECK_THROWS_WITH_AS((void)parse_config_text("\nH = fast\n", "run.cfg"),
                         doctest::Contains("run.cfg:2"), ConfigError);
    CHECK_THROWS_WITH_AS((void)parse_config_text("just words\n", "run.cfg"),
                         doctest::Contains("key = value"), ConfigError);
}

TEST_CASE("cross-field validation catches inconsistent requests") {
    CHECK_THROWS_WITH_AS((void)parsed("H = -1\n"), doctest::Contains("H"), ConfigError);
    CHECK_THROWS_WITH_AS((void)parsed("hermite = true\n"), doctest::Contains("hermite"),
                         ConfigError);
    CHECK_THROWS_WITH_AS((void)parsed("H = 0.3\nt_end = 1\n"), doctest::Contains("multiple"),
                         ConfigError);
    CHECK_THROWS_WITH_AS((void)parsed("method = fixed-rk4\n"), doctest::Contains("initial_step"),
                         ConfigError);
    CHECK_THROWS_WITH_AS((void)parsed("model = moon-lander\n"), doctest::Contains("moon-lander"),
                         ConfigError);
    CHECK_THROWS_WITH_AS((void)parsed("scheme = power-negotiated\nmodel = linear-uni\n"),
                         doctest::Contains("power-negotiated"), ConfigError);
    CHECK_NOTHROW((void)parsed("scheme = power-negotiated\nmodel = gradient-flow\n"));
}

TEST_CASE("the config echo reproduces the configuration it came from") {
    const RunConfig original = parsed("model = linear-mutual\n"
                                      "scheme = balance-corrected\n"
                                      "extrap = 1\n"
                                      "H = 0.05\n"
                                      "t_end = 7.5\n"
                                      "abs_tol = 1e-10\n"
                                      "H_list = 0.2, 0.1, 0.05, 0.025\n"
                                      "x1_0 = 0.25\n");
    RunConfig reparsed = parse_config_text(echo_as_text(original), "echo");
    finalize_config(reparsed);
    CHECK(echo_as_text(reparsed) == echo_as_text(original));
    CHECK(reparsed.H == original.H);
    CHECK(reparsed.H_list == original.H_list);
    CHECK(reparsed.a12 == 1.0);  // the mutual-variant default was baked in
}

TEST_CASE("seventeen-digit rendering round-trips binary doubles exactly") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, 0.2 + 0.1}) {
        const std::string s = format_double(v);
        const double back = std::strtod(s.c_str(), nullptr);
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
}

TEST_CASE("master-config translation carries every field across") {
    RunConfig cfg = parsed("scheme = power-negotiated\n"
                           "extrap = 1\n"
                           "hermite = true\n"
                           "H = 0.25\n"
                           "t_end = 5\n"
                           "inversion_eps = 1e-5\n"
                           "sample_dt = 0.01\n"
                           "parallel = true\n"
                           "max_step = 0.5\n");
    const MasterConfig mc = to_master_config(cfg);
    CHECK(mc.scheme == Scheme::PowerNegotiated);
    CHECK(mc.extrap_degree == 1);
    CHECK(mc.hermite == true);
    CHECK(mc.H == 0.25);
    CHECK(mc.t_end == 5.0);
    CHECK(mc.inversion_eps == 1e-5);
    CHECK(mc.sample_dt == 0.01);
    CHECK(mc.parallel_blocks == true);
    CHECK(mc.integrator.max_step == 0.5);
    CHECK(mc.integrator.method == IntegratorMethod::AdaptiveRK54);
}

TEST_CASE("trace tables survive the text format bit-for-bit") {
    RunConfig cfg = parsed("scheme = power-negotiated\nextrap = 1\nH = 0.2\nt_end = 2\n");
    const TraceTable table = run_to_table(cfg);
    REQUIRE(!table.rows.empty());
    CHECK(table.columns.front() == "t");
    CHECK(!table.spans.empty());

    const std::string text = render_trace_csv(table);
    const TraceTable back = parse_trace_csv(text, "memory");
    CHECK(trace_tables_equal(table, back));
    CHECK(render_trace_csv(back) == text);

    const auto path = temp_file("cosim-roundtrip");
    write_trace_csv(table, path.string());
    const TraceTable from_disk = read_trace_csv(path.string());
    CHECK(trace_tables_equal(table, from_disk));
    std::filesystem::remove(path);
}

TEST_CASE("trace table columns follow the advertised schema") {
    RunConfig bc = parsed("scheme = balance-corrected\nH = 0.2\nt_end = 1\n");
    const TraceTable t = run_to_table(bc);
    REQUIRE(t.columns.size() >= 6);
    CHECK(t.columns[0] == "t");
    CHECK(t.columns[1] == "x_1");
    CHECK(t.columns[2] == "x_2");
    CHECK(t.columns[3] == "E");
    CHECK(t.columns[4] == "dE_1");
    CHECK(t.columns[5] == "dE_2");

    RunConfig pn = parsed("scheme = power-negotiated\nH = 0.2\nt_end = 1\n");
    const TraceTable t2 = run_to_table(pn);
    bool has_phat = false;
    for (const auto& c : t2.columns) has_phat |= (c == "P_hat_1");
    CHECK(has_phat);
}

TEST_CASE("run command writes the file and reports success") {
    RunConfig cfg = parsed("H = 0.2\nt_end = 1\n");
    const auto path = temp_file("cosim-cmd-run");
    cfg.out = path.string();
    std::ostringstream log, err;
    const int rc = cmd_run(cfg, log, err);
    CHECK(rc == 0);
    CHECK(err.str().empty());
    CHECK(log.str().find("wrote") != std::string::npos);
    CHECK(std::filesystem::exists(path));
    std::filesystem::remove(path);
}

TEST_CASE("a failing run leaves no output file behind") {
    RunConfig cfg = parsed("H = 0.2\nt_end = 1\n");
    cfg.out = "/nonexistent-directory/trace.csv";
    std::ostringstream log, err;
    const int rc = cmd_run(cfg, log, err);
    CHECK(rc == 1);
    CHECK(err.str().find("error") != std::string::npos);
    CHECK(!std::filesystem::exists(cfg.out));
}

TEST_CASE("convergence and stability commands emit their summary footers") {
    RunConfig conv = parsed("model = linear-uni\nH_list = 0.2, 0.1, 0.05, 0.025\nt_end = 2\n");
    const std::string ctext = converge_csv(conv);
    CHECK(ctext.find("H,error,err_x_1,err_x_2\n") != std::string::npos);
    CHECK(ctext.find("# slope = ") != std::string::npos);
    CHECK(ctext.find("# model = linear-uni\n") != std::string::npos);

    RunConfig stab = parsed("H = 0.2\nt_end = 10\n");
    const std::string stext = stability_csv(stab);
    CHECK(stext.find("t,E,production\n") != std::string::npos);
    CHECK(stext.find("# relative_drift = ") != std::string::npos);
    CHECK(stext.find("# guard_spans = 0\n") != std::string::npos);

    RunConfig nopower = parsed("model = linear-uni\nH = 0.2\nt_end = 10\n");
    CHECK_THROWS_AS((void)stability_csv(nopower), ConfigError);
}
