#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfld/diagnostics.hpp"

namespace mfld {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 17 significant digits: every double survives a write/read roundtrip.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("csv: cannot open " + path + " for writing");
  return os;
}

inline void finish_csv(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw IoError("csv: write failed for " + path);
}

}  // namespace detail

inline constexpr const char* kFlowTraceHeader = "s,J_sigma,J_stderr,moment_q,foc_spread,gibbs_residual,rho_to_ref";

inline void write_flow_trace(const FlowTrace& trace, const std::string& path) {
  auto os = detail::open_csv(path);
  os << kFlowTraceHeader << '\n';
  for (const auto& r : trace.rows) {
    os << format_double(r.s) << ',' << format_double(r.J_sigma) << ',' << format_double(r.J_stderr) << ','
       << format_double(r.moment_q) << ',' << format_double(r.foc_spread) << ','
       << format_double(r.gibbs_residual) << ',' << format_double(r.rho_to_ref) << '\n';
  }
  detail::finish_csv(os, path);
}

inline void write_contraction(const ContractionResult& c, const std::string& path) {
  auto os = detail::open_csv(path);
  os << "s,rho_q\n";
  for (std::size_t l = 0; l < c.s.size(); ++l) os << format_double(c.s[l]) << ',' << format_double(c.rho[l]) << '\n';
  detail::finish_csv(os, path);
}

// One row per particle in (j, k, i) order.
inline void write_clouds(const ParticleControl& pc, const std::string& path) {
  auto os = detail::open_csv(path);
  os << "j,k,i";
  for (std::size_t c = 0; c < pc.action_dim; ++c) os << ",a_" << c + 1;
  os << '\n';
  for (std::size_t j = 0; j < pc.outer_count; ++j)
    for (std::size_t k = 0; k < pc.steps(); ++k) {
      const auto cl = pc.cloud(j, k);
      for (std::size_t i = 0; i < pc.particles; ++i) {
        os << j << ',' << k << ',' << i;
        for (std::size_t c = 0; c < pc.action_dim; ++c) os << ',' << format_double(cl(i, c));
        os << '\n';
      }
    }
  detail::finish_csv(os, path);
}

// Forward and adjoint paths: j,k,t,x_1..x_d,y_1..y_d.
inline void write_paths(const TrajectoryBundle& tb, const AdjointBundle& ab, const std::string& path) {
  auto os = detail::open_csv(path);
  os << "j,k,t";
  for (std::size_t c = 0; c < tb.state_dim; ++c) os << ",x_" << c + 1;
  for (std::size_t c = 0; c < tb.state_dim; ++c) os << ",y_" << c + 1;
  os << '\n';
  for (std::size_t j = 0; j < tb.outer_count; ++j)
    for (std::size_t k = 0; k <= tb.grid.steps; ++k) {
      os << j << ',' << k << ',' << format_double(tb.grid.node(k));
      for (double v : tb.at(j, k)) os << ',' << format_double(v);
      for (double v : ab.y(j, k)) os << ',' << format_double(v);
      os << '\n';
    }
  detail::finish_csv(os, path);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Numeric CSV with one header line.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("csv: cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("csv: missing header in " + path);
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw IoError("csv: wrong column count on line " + std::to_string(lineno) + " of " + path);
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0')
        throw IoError("csv: bad number '" + c + "' on line " + std::to_string(lineno) + " of " + path);
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace mfld
