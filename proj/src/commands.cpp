#include "cosim/commands.hpp"

#include <cstdio>
#include <exception>
#include <fstream>

#include "cosim/analysis.hpp"

namespace cosim {

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceFormatError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw TraceFormatError("write to '" + path + "' failed");
}

std::string render_header(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : config_echo(cfg)) {
    out += "# " + key + " = " + value + "\n";
  }
  return out;
}

// Builds the output file in two phases so a simulation failure writes
// nothing and a write failure does not leave a truncated file around.
template <typename BuildText>
int write_command(const RunConfig& cfg, std::ostream& log, std::ostream& err,
                  BuildText&& build, std::string* summary_out) {
  std::string text;
  std::string summary;
  try {
    text = build(summary);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    write_text_file(cfg.out, text);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    std::remove(cfg.out.c_str());
    return 1;
  }
  log << "wrote " << cfg.out << ": " << summary << "\n";
  if (summary_out) *summary_out = summary;
  return 0;
}

}  // namespace

SimulationTrace run_configured(const RunConfig& cfg) {
  const CoupledSystem sys = build_configured_system(cfg);
  return run_master(sys.blocks, sys.connections, sys.x0, to_master_config(cfg), sys.energy);
}

TraceTable run_to_table(const RunConfig& cfg) {
  return build_trace_table(run_configured(cfg), config_echo(cfg));
}

std::string converge_csv(const RunConfig& cfg) {
  const CoupledSystem sys = build_configured_system(cfg);
  std::function<Vec(double)> reference = sys.reference;
  if (!reference) {
    const Vec x0 = sys.x0;
    const auto rhs = sys.monolithic_rhs;
    reference = [x0, rhs](double t) {
      IntegratorConfig ic;
      ic.abs_tol = 1e-13;
      ic.rel_tol = 1e-13;
      return integrate(rhs, x0, 0.0, t, ic).x_end;
    };
  }
  const auto run_cell = [&cfg](double h) {
    RunConfig cell = cfg;
    cell.H = h;
    return run_configured(cell);
  };
  const ConvergenceStudy study =
      convergence_study(cfg.H_list, run_cell, reference, cfg.parallel);

  const std::size_t n = study.component_errors.empty() ? 0 : study.component_errors.front().size();
  std::string out = render_header(cfg);
  out += "H,error";
  for (std::size_t i = 0; i < n; ++i) out += ",err_x_" + std::to_string(i + 1);
  out += "\n";
  for (std::size_t k = 0; k < study.H_values.size(); ++k) {
    out += format_double(study.H_values[k]) + "," + format_double(study.errors[k]);
    for (std::size_t i = 0; i < n; ++i) out += "," + format_double(study.component_errors[k][i]);
    out += "\n";
  }
  out += "# slope = " + format_double(study.slope) + "\n";
  return out;
}

std::string stability_csv(const RunConfig& cfg) {
  const CoupledSystem sys = build_configured_system(cfg);
  if (!sys.energy) {
    throw ConfigError("model '" + cfg.model + "' defines no energy; pick one that does");
  }
  const SimulationTrace trace =
      run_master(sys.blocks, sys.connections, sys.x0, to_master_config(cfg), sys.energy);
  const EnergyReport report = energy_drift(trace, sys.energy);

  std::string out = render_header(cfg);
  out += "t,E,production\n";
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    const double prod = k == 0 ? 0.0 : report.interval_production[k - 1];
    out += format_double(report.times[k]) + "," + format_double(report.energy[k]) + "," +
           format_double(prod) + "\n";
  }
  out += "# relative_drift = " + format_double(report.relative_drift) + "\n";
  out += "# abs_production_total = " + format_double(report.abs_production_total) + "\n";
  out += "# abs_production_in_spans = " + format_double(report.abs_production_in_spans) + "\n";
  out += "# max_abs_production_outside_spans = " +
         format_double(report.max_abs_production_outside_spans) + "\n";
  out += "# guard_spans = " + std::to_string(trace.spans.size()) + "\n";
  for (const SingularSpan& sp : trace.spans) {
    out += "# span: block=" + std::to_string(sp.block) +
           " component=" + std::to_string(sp.component) +
           " interval=" + std::to_string(sp.interval) +
           " t_begin=" + format_double(sp.t_begin) +
           " t_end=" + format_double(sp.t_end) + "\n";
  }
  return out;
}

int cmd_run(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  return write_command(
      cfg, log, err,
      [&cfg](std::string& summary) {
        const TraceTable table = run_to_table(cfg);
        summary = std::to_string(table.rows.size()) + " rows, " +
                  std::to_string(table.spans.size()) + " guard spans";
        return render_trace_csv(table);
      },
      nullptr);
}

int cmd_converge(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  return write_command(
      cfg, log, err,
      [&cfg](std::string& summary) {
        const std::string text = converge_csv(cfg);
        const std::size_t pos = text.rfind("# slope = ");
        summary = pos == std::string::npos ? "done" : text.substr(pos + 2, text.size() - pos - 3);
        return text;
      },
      nullptr);
}

int cmd_stability(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  return write_command(
      cfg, log, err,
      [&cfg](std::string& summary) {
        const std::string text = stability_csv(cfg);
        const std::size_t pos = text.find("# relative_drift = ");
        if (pos == std::string::npos) {
          summary = "done";
        } else {
          const std::size_t end = text.find('\n', pos);
          summary = text.substr(pos + 2, end - pos - 2);
        }
        return text;
      },
      nullptr);
}

}  // namespace cosim
