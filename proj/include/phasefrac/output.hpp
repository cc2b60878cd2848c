#pragma once

// Ledger CSV and legacy-VTK snapshots. Numbers are written with
// std::to_chars (shortest round-trip form, always a dot separator).

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "phasefrac/errors.hpp"
#include "phasefrac/mesh.hpp"
#include "phasefrac/stepper.hpp"

namespace phasefrac {

inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline const std::vector<std::string>& ledger_columns() {
  static const std::vector<std::string> cols{
      "step", "t", "kinetic", "elastic", "surface", "dissipation", "work", "slack",
      "balance", "balance_certified", "active_nodes", "v_min"};
  return cols;
}

inline void write_ledger_header(std::ostream& out) {
  const auto& cols = ledger_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

inline void write_ledger_row(std::ostream& out, const LedgerRow& r) {
  out << r.j << ',' << format_number(r.t) << ',' << format_number(r.kinetic) << ','
      << format_number(r.elastic) << ',' << format_number(r.surface) << ','
      << format_number(r.dissipation) << ',' << format_number(r.work) << ','
      << format_number(r.slack) << ',' << format_number(r.balance) << ','
      << (r.balance_certified ? 1 : 0) << ',' << r.active_nodes << ','
      << format_number(r.v_min) << '\n';
}

inline void write_ledger(std::ostream& out, const std::vector<LedgerRow>& ledger) {
  write_ledger_header(out);
  for (const auto& r : ledger) write_ledger_row(out, r);
}

/// Legacy ASCII VTK unstructured grid with point data v (scalar), u and udot
/// (3-vectors, zero-padded).
inline void write_vtk(std::ostream& out, const Mesh& mesh, const State& s) {
  const int n = mesh.node_count();
  const int d = mesh.dim;
  const int npe = mesh.nodes_per_element();
  out << "# vtk DataFile Version 3.0\n";
  out << "phase field snapshot step " << s.j << " t " << format_number(s.t) << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n << " double\n";
  for (const auto& p : mesh.nodes)
    out << format_number(p[0]) << ' ' << format_number(p[1]) << " 0\n";
  out << "CELLS " << mesh.element_count() << ' ' << mesh.element_count() * (npe + 1) << '\n';
  for (const auto& el : mesh.elements) {
    out << npe;
    for (int a = 0; a < npe; ++a) out << ' ' << el[a];
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.element_count() << '\n';
  for (int e = 0; e < mesh.element_count(); ++e) out << (d == 1 ? 3 : 5) << '\n';
  out << "POINT_DATA " << n << '\n';
  out << "SCALARS v double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < n; ++i) out << format_number(s.v[i]) << '\n';
  auto vectors = [&](const char* name, const Vec& x) {
    out << "VECTORS " << name << " double\n";
    for (int i = 0; i < n; ++i) {
      out << format_number(x[i * d]) << ' ' << (d == 2 ? format_number(x[i * d + 1]) : "0")
          << " 0\n";
    }
  };
  vectors("u", s.u);
  vectors("udot", s.udot);
}

inline std::string snapshot_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fields_%04d.vtk", index);
  return buf;
}

}  // namespace phasefrac
