#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cosim/coupling.hpp"

namespace cosim {

class TraceFormatError : public std::runtime_error {
 public:
  explicit TraceFormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Tabular view of a simulation trace: a `# key = value` header block, a
/// column-name row, numeric rows, and `# span:` trailer lines for the guard
/// spans. Rendering is deterministic; identical tables produce identical
/// bytes.
struct TraceTable {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<SingularSpan> spans;
};

/// Samples a finished run into rows `t, x_1..x_n[, E][, P_hat_1..m][, dE_1..p]`.
/// Energy, negotiated-power and balance-defect columns appear only when the
/// run produced them. Interval-valued columns (P_hat, dE) take the value of
/// the interval containing t, right-continuous at exchange points.
TraceTable build_trace_table(const SimulationTrace& trace,
                             std::vector<std::pair<std::string, std::string>> header);

std::string render_trace_csv(const TraceTable& table);
void write_trace_csv(const TraceTable& table, const std::string& path);

/// Inverse of render_trace_csv; numeric fields are restored bit-exactly.
TraceTable parse_trace_csv(const std::string& text, const std::string& origin);
TraceTable read_trace_csv(const std::string& path);

/// Bitwise comparison of every numeric field plus header/columns/spans.
bool trace_tables_equal(const TraceTable& a, const TraceTable& b);

}  // namespace cosim
