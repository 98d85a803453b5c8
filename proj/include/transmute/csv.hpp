#pragma once

// CSV export. Numbers use the shortest round-trip decimal form, so equal
// inputs give byte-identical files.

#include <charconv>
#include <fstream>
#include <string>
#include <system_error>

#include "transmute/core_model.hpp"

namespace transmute::csv {

inline std::string number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::ofstream open(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::invalid_argument, "cannot open " + path + " for writing");
  return os;
}

/// Long format: one row per (time, space) node. Every stride-th time row is written.
inline void write_field(const std::string& path, const ComplexField& u, const char* header = "t,x,re,im",
                        int stride = 1) {
  require(stride >= 1, ErrorCode::invalid_argument, "stride must be >= 1");
  auto os = open(path);
  os << header << '\n';
  const auto& v = u.values();
  for (int k = 0; k < u.n_t(); k += stride) {
    const std::string t = number(u.time_grid().node(k));
    for (int i = 0; i < u.n_x(); ++i)
      os << t << ',' << number(u.space_grid().node(i)) << ',' << number(v(k, i).real()) << ','
         << number(v(k, i).imag()) << '\n';
  }
}

inline void write_kernel(const std::string& path, const ComplexField& kernel) {
  write_field(path, kernel, "t,tau,re,im");
}

inline void write_source(const std::string& path, const SpatialSource& f) {
  auto os = open(path);
  os << "x,re,im\n";
  for (int i = 0; i < f.grid().size(); ++i)
    os << number(f.grid().node(i)) << ',' << number(f.values()[i].real()) << ','
       << number(f.values()[i].imag()) << '\n';
}

/// Absent sides are written as empty fields.
inline void write_trace(const std::string& path, const BoundaryTrace& tr) {
  auto os = open(path);
  os << "t,left_re,left_im,right_re,right_im\n";
  const auto& L = tr.left();
  const auto& R = tr.right();
  for (int k = 0; k < tr.time_grid().size(); ++k) {
    os << number(tr.time_grid().node(k)) << ',';
    if (L.size() > 0) os << number(L[k].real()) << ',' << number(L[k].imag());
    else os << ',';
    os << ',';
    if (R.size() > 0) os << number(R[k].real()) << ',' << number(R[k].imag());
    else os << ',';
    os << '\n';
  }
}

}  // namespace transmute::csv
