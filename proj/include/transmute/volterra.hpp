#pragma once

// The second-kind Volterra operator (Kv)(t) = R(0) v(t) + int_0^t R'(t-s) v(s) ds,
// its inversion, and source identification from the full field.

#include <algorithm>
#include <cmath>

#include "transmute/core_model.hpp"
#include "transmute/forward_solver.hpp"

namespace transmute {

struct VolterraTolerances {
  /// |R(0)| <= singular * max|R| signals R(0) = 0.
  double singular = 1e-12;
  /// Relative threshold used to locate support infima.
  double support = 1e-6;
};

namespace detail {

inline void require_series(const SourceTime& R, const CVector& v) {
  require(v.size() == R.size(), ErrorCode::dimension, "series must share the profile's time grid");
}

inline void require_nonsingular(const SourceTime& R, double tol) {
  const double scale = R.samples().cwiseAbs().maxCoeff();
  if (!(std::abs(R.r0()) > tol * scale) || scale == 0.0)
    throw Error(ErrorCode::singular_operator,
                "R(0) vanishes; the Volterra operator is not of the second kind");
}

}  // namespace detail

/// Product-trapezoid evaluation of K v.
inline CVector apply_K(const SourceTime& R, const CVector& v) {
  detail::require_series(R, v);
  const int nt = R.size();
  const double dt = R.time_grid().step();
  const CVector& dr = R.derivative();
  CVector out(nt);
  for (int n = 0; n < nt; ++n) {
    cplx acc = R.r0() * v[n];
    if (n > 0) {
      acc += 0.5 * dt * (dr[n] * v[0] + dr[0] * v[n]);
      for (int j = 1; j < n; ++j) acc += dt * dr[n - j] * v[j];
    }
    out[n] = acc;
  }
  return out;
}

/// Forward substitution on the lower-triangular product-trapezoid system,
/// so apply_K(R, invert_K(R, g)) reproduces g to rounding.
inline CVector invert_K(const SourceTime& R, const CVector& g,
                        const VolterraTolerances& tol = {}) {
  detail::require_series(R, g);
  detail::require_nonsingular(R, tol.singular);
  const int nt = R.size();
  const double dt = R.time_grid().step();
  const CVector& dr = R.derivative();
  const cplx diag = R.r0() + 0.5 * dt * dr[0];
  if (!(std::abs(diag) > 0.0))
    throw Error(ErrorCode::singular_operator, "product-trapezoid diagonal vanishes; refine dt");
  CVector z(nt);
  z[0] = g[0] / R.r0();
  for (int n = 1; n < nt; ++n) {
    cplx acc = g[n] - 0.5 * dt * dr[n] * z[0];
    for (int j = 1; j < n; ++j) acc -= dt * dr[n - j] * z[j];
    z[n] = acc / diag;
  }
  return z;
}

/// Solves u_t(.,x) = K z(.,x) node by node.
inline ComplexField recover_z(const ComplexField& u, const SourceTime& R,
                              const VolterraTolerances& tol = {}) {
  require(R.time_grid() == u.time_grid(), ErrorCode::dimension, "recover_z: time grid mismatch");
  detail::require_nonsingular(R, tol.singular);
  const CMatrix ut = finite_difference_rows(u.values(), u.time_grid().step());
  CMatrix z(u.n_t(), u.n_x());
  for (int i = 0; i < u.n_x(); ++i) z.col(i) = invert_K(R, ut.col(i), tol);
  return ComplexField(u.time_grid(), u.space_grid(), std::move(z));
}

/// u(t,x) = int_0^t R(s) z(t-s,x) ds; checks the representation of recover_z.
inline ComplexField convolve_with_profile(const SourceTime& R, const ComplexField& z) {
  return duhamel_convolve(R, z);
}

/// f = i z(0, .).
inline SpatialSource extract_source(const ComplexField& z) {
  CVector f = I * z.profile(0);
  const int n = z.n_x();
  f[0] = f[n - 1] = 0.0;
  return SpatialSource(z.space_grid(), std::move(f));
}

/// Z(t) = ||(i z_t + A z)(t, .)||_{L2(Omega)} per time node, the profile fed
/// to the Titchmarsh diagnostic.
inline RVector homogeneous_residual_profile(const ComplexField& z, const DiscreteOperator& op) {
  require(z.space_grid() == op.grid(), ErrorCode::dimension, "residual: grid mismatch");
  const CMatrix res =
      I * finite_difference_rows(z.values(), z.time_grid().step()) + op.apply_rows(z.values());
  const int nx = z.n_x();
  const double sdx = std::sqrt(z.space_grid().spacing());
  RVector out(z.n_t());
  for (int k = 0; k < z.n_t(); ++k) out[k] = sdx * res.row(k).segment(1, nx - 2).norm();
  return out;
}

/// Discrete L2(Q) residual of i z_t + A z = 0 on interior nodes.
inline double homogeneous_residual_of_z(const ComplexField& z, const DiscreteOperator& op) {
  return std::sqrt(z.time_grid().step()) * homogeneous_residual_profile(z, op).norm();
}

struct TitchmarshReport {
  double lambda_hat;
  double r_hat;
  bool sum_ok;
};

/// Support infima of two nonnegative profiles on [0,T]. A series that never
/// exceeds the threshold has infimum T. Diagnostic only.
inline TitchmarshReport convolution_vanish_support(const RVector& Rs, const RVector& Zs, double T,
                                                   const VolterraTolerances& tol = {}) {
  require(Rs.size() == Zs.size() && Rs.size() >= 2, ErrorCode::dimension,
          "support diagnostic needs two series on one grid");
  require(T > 0.0, ErrorCode::invalid_argument, "support diagnostic needs T > 0");
  require((Zs.array() >= 0.0).all(), ErrorCode::invalid_argument, "Z must be a norm profile");
  const double dt = T / static_cast<double>(Rs.size() - 1);
  auto infimum = [&](const RVector& s) {
    const double peak = s.cwiseAbs().maxCoeff();
    if (peak == 0.0) return T;
    const double thresh = tol.support * peak;
    for (Eigen::Index k = 0; k < s.size(); ++k)
      if (std::abs(s[k]) > thresh) return k * dt;
    return T;
  };
  TitchmarshReport rep{infimum(Rs), infimum(Zs), false};
  rep.sum_ok = rep.lambda_hat + rep.r_hat >= T - 2.0 * dt;
  return rep;
}

/// R~(t) = int_0^t R: cumulative trapezoid, derivative R, R~(0) = 0.
inline SourceTime antiderivative_reduction(const SourceTime& R) {
  const int nt = R.size();
  const double dt = R.time_grid().step();
  const CVector& s = R.samples();
  CVector cum(nt);
  cum[0] = 0.0;
  for (int k = 1; k < nt; ++k) cum[k] = cum[k - 1] + 0.5 * dt * (s[k - 1] + s[k]);
  return SourceTime(R.time_grid(), std::move(cum), s);
}

struct IdentificationResult {
  SpatialSource f;
  ComplexField z;
  /// True when R(0) = 0 forced the problem onto (u_t, R').
  bool reduced;
};

/// Full-field source identification. When R(0) = 0 (e.g. a profile produced
/// by antiderivative_reduction) the data are lifted back to (u_t, R'), which
/// solves the same equation with a nonvanishing onset.
inline IdentificationResult identify_source(const ComplexField& u, const SourceTime& R,
                                            const VolterraTolerances& tol = {}) {
  const double scale = R.samples().cwiseAbs().maxCoeff();
  if (std::abs(R.r0()) > tol.singular * scale && scale > 0.0) {
    ComplexField z = recover_z(u, R, tol);
    SpatialSource f = extract_source(z);
    return {std::move(f), std::move(z), false};
  }
  const ComplexField ut = finite_difference_time(u);
  const SourceTime lifted = SourceTime::from_samples(R.time_grid(), R.derivative());
  ComplexField z = recover_z(ut, lifted, tol);
  SpatialSource f = extract_source(z);
  return {std::move(f), std::move(z), true};
}

}  // namespace transmute
