#include "cosim/trace_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cosim/config.hpp"

namespace cosim {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

double parse_strict_double(const std::string& field, const std::string& where) {
  const std::string v = trim(field);
  if (!v.empty()) {
    const char* begin = v.c_str();
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(begin, &end);
    if (end == begin + v.size()) return d;
  }
  throw TraceFormatError(where + ": bad numeric field '" + field + "'");
}

std::size_t parse_strict_size(const std::string& field, const std::string& where) {
  const std::string v = trim(field);
  if (!v.empty()) {
    const char* begin = v.c_str();
    char* end = nullptr;
    const unsigned long long n = std::strtoull(begin, &end, 10);
    if (end == begin + v.size()) return static_cast<std::size_t>(n);
  }
  throw TraceFormatError(where + ": bad integer field '" + field + "'");
}

std::vector<std::string> split_comma(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

// "key=value" token of a span line
std::pair<std::string, std::string> split_token(const std::string& tok, const std::string& where) {
  const std::size_t eq = tok.find('=');
  if (eq == std::string::npos) {
    throw TraceFormatError(where + ": bad span token '" + tok + "'");
  }
  return {tok.substr(0, eq), tok.substr(eq + 1)};
}

}  // namespace

TraceTable build_trace_table(const SimulationTrace& trace,
                             std::vector<std::pair<std::string, std::string>> header) {
  TraceTable table;
  table.header = std::move(header);
  table.spans = trace.spans;

  const std::size_t n = trace.total_state_dim;
  const std::size_t pairs =
      trace.power_records.empty() ? 0 : trace.power_records.front().size();
  const std::size_t signals =
      trace.balance_errors.empty() ? 0 : trace.tracked_signals.size();

  table.columns.push_back("t");
  for (std::size_t i = 0; i < n; ++i) table.columns.push_back("x_" + std::to_string(i + 1));
  if (trace.has_energy) table.columns.push_back("E");
  for (std::size_t j = 0; j < pairs; ++j) table.columns.push_back("P_hat_" + std::to_string(j + 1));
  for (std::size_t s = 0; s < signals; ++s) table.columns.push_back("dE_" + std::to_string(s + 1));

  table.rows.reserve(trace.sample_times.size());
  for (std::size_t i = 0; i < trace.sample_times.size(); ++i) {
    const double t = trace.sample_times[i];
    std::vector<double> row;
    row.reserve(table.columns.size());
    row.push_back(t);
    row.insert(row.end(), trace.sample_states[i].begin(), trace.sample_states[i].end());
    if (trace.has_energy) row.push_back(trace.sample_energy[i]);
    if (pairs > 0 || signals > 0) {
      const std::size_t k = trace.interval_of(t);
      for (std::size_t j = 0; j < pairs; ++j) {
        const PowerRecord& rec = trace.power_records[k][j];
        row.push_back(rec.phat_a + rec.rate_a * (t - rec.anchor));
      }
      for (std::size_t s = 0; s < signals; ++s) row.push_back(trace.balance_errors[k][s]);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string render_trace_csv(const TraceTable& table) {
  std::string out;
  for (const auto& [key, value] : table.header) {
    out += "# " + key + " = " + value + "\n";
  }
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ",";
    out += table.columns[i];
  }
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += format_double(row[i]);
    }
    out += "\n";
  }
  for (const SingularSpan& sp : table.spans) {
    out += "# span: block=" + std::to_string(sp.block) +
           " component=" + std::to_string(sp.component) +
           " interval=" + std::to_string(sp.interval) +
           " t_begin=" + format_double(sp.t_begin) +
           " t_end=" + format_double(sp.t_end) + "\n";
  }
  return out;
}

void write_trace_csv(const TraceTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceFormatError("cannot open '" + path + "' for writing");
  out << render_trace_csv(table);
  out.flush();
  if (!out) throw TraceFormatError("write to '" + path + "' failed");
}

TraceTable parse_trace_csv(const std::string& text, const std::string& origin) {
  TraceTable table;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool have_columns = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.front() == '#') {
      const std::string body = trim(stripped.substr(1));
      if (body.rfind("span:", 0) == 0) {
        SingularSpan sp;
        std::istringstream toks(body.substr(5));
        std::string tok;
        while (toks >> tok) {
          auto [key, value] = split_token(tok, where);
          if (key == "block") sp.block = parse_strict_size(value, where);
          else if (key == "component") sp.component = parse_strict_size(value, where);
          else if (key == "interval") sp.interval = parse_strict_size(value, where);
          else if (key == "t_begin") sp.t_begin = parse_strict_double(value, where);
          else if (key == "t_end") sp.t_end = parse_strict_double(value, where);
          else throw TraceFormatError(where + ": unknown span field '" + key + "'");
        }
        table.spans.push_back(sp);
      } else {
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos) {
          throw TraceFormatError(where + ": bad header line '" + stripped + "'");
        }
        table.header.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      }
      continue;
    }
    if (!have_columns) {
      table.columns = split_comma(stripped);
      have_columns = true;
      continue;
    }
    const std::vector<std::string> fields = split_comma(stripped);
    if (fields.size() != table.columns.size()) {
      throw TraceFormatError(where + ": expected " + std::to_string(table.columns.size()) +
                             " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& f : fields) row.push_back(parse_strict_double(f, where));
    table.rows.push_back(std::move(row));
  }
  if (!have_columns) throw TraceFormatError(origin + ": no column row found");
  return table;
}

TraceTable read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceFormatError("cannot open trace file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace_csv(buf.str(), path);
}

bool trace_tables_equal(const TraceTable& a, const TraceTable& b) {
  if (a.header != b.header || a.columns != b.columns) return false;
  if (a.rows.size() != b.rows.size() || a.spans.size() != b.spans.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].size() != b.rows[i].size()) return false;
    for (std::size_t j = 0; j < a.rows[i].size(); ++j) {
      // bitwise: distinguishes -0.0 from 0.0 and compares NaN payload-free
      const double x = a.rows[i][j], y = b.rows[i][j];
      if (!(x == y) && !(x != x && y != y)) return false;
      if (x == y && (x == 0.0) && (std::signbit(x) != std::signbit(y))) return false;
    }
  }
  for (std::size_t i = 0; i < a.spans.size(); ++i) {
    const SingularSpan& s = a.spans[i];
    const SingularSpan& t = b.spans[i];
    if (s.block != t.block || s.component != t.component || s.interval != t.interval ||
        s.t_begin != t.t_begin || s.t_end != t.t_end) {
      return false;
    }
  }
  return true;
}

}  // namespace cosim
