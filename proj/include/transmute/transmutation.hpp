#pragma once

// Kernel transform w(t,x) = int_0^T K(t,tau) u(tau,x) dtau, its action on
// Neumann traces, the elliptic residual of w, and recovery of u(0,.) from
// exponential moments of u.

#include <cmath>

#include "transmute/core_model.hpp"
#include "transmute/forward_solver.hpp"

namespace transmute {

namespace detail {

inline void require_tau_match(const ComplexField& kernel, const TimeGrid& tg) {
  const Grid1D& tau = kernel.space_grid();
  require(tau.size() == tg.size() && tau.x_min() == 0.0 && tau.x_max() == tg.t_max(),
          ErrorCode::dimension, "kernel tau grid must equal the field's time grid");
}

// K diag(trapezoid) acting on a (tau x anything) matrix.
inline CMatrix tau_quadrature(const ComplexField& kernel, const CMatrix& rhs) {
  const RVector w = trapezoid_weights(kernel.space_grid().size(), kernel.space_grid().spacing());
  return kernel.values() * (w.cast<cplx>().asDiagonal() * rhs);
}

}  // namespace detail

/// Output rows follow the kernel's pseudo-space axis.
inline ComplexField transform_field(const ComplexField& kernel, const ComplexField& u) {
  detail::require_tau_match(kernel, u.time_grid());
  return ComplexField(kernel.time_grid(), u.space_grid(), detail::tau_quadrature(kernel, u.values()));
}

inline BoundaryTrace transform_trace(const ComplexField& kernel, const BoundaryTrace& trace) {
  detail::require_tau_match(kernel, trace.time_grid());
  CVector left, right;
  if (trace.left().size() > 0) left = detail::tau_quadrature(kernel, trace.left());
  if (trace.right().size() > 0) right = detail::tau_quadrature(kernel, trace.right());
  return BoundaryTrace(trace.side(), kernel.time_grid(), std::move(left), std::move(right));
}

/// ||-w_tt + A w|| / ||w|| over interior nodes of both axes; 0 for w = 0.
inline double elliptic_residual(const ComplexField& w, const DiscreteOperator& op) {
  require(w.space_grid() == op.grid(), ErrorCode::dimension, "elliptic residual: grid mismatch");
  const int nt = w.n_t();
  const int nx = w.n_x();
  require(nt >= 3, ErrorCode::grid_too_small, "elliptic residual needs 3 pseudo-space nodes");
  const double norm = w.l2_norm();
  if (norm == 0.0) return 0.0;
  const double dt = w.time_grid().step();
  const CMatrix& v = w.values();
  const CMatrix Av = op.apply_rows(v);
  double acc = 0.0;
  for (int k = 1; k + 1 < nt; ++k) {
    const auto row = -(v.row(k + 1) - 2.0 * v.row(k) + v.row(k - 1)) / (dt * dt) + Av.row(k);
    acc += row.segment(1, nx - 2).squaredNorm();
  }
  return std::sqrt(dt * w.space_grid().spacing() * acc) / norm;
}

struct ReconstructTolerances {
  double kappa = 1e-6;
};

/// u(0) = -i kappa / (1 - e^{i kappa T}) (W + (W1 - W2) / (i kappa)) with
/// W = int e^{i kappa tau} u, W1 = int e^{i kappa tau} u_tau, W2 = e^{i kappa T} int u_tau.
/// The discrete moments are a summation-by-parts pair, so the identity holds
/// to rounding for any sampled u.
inline SpatialSource reconstruct_initial(const ComplexField& u, double kappa,
                                         const ReconstructTolerances& tol = {}) {
  const TimeGrid& tg = u.time_grid();
  const double T = tg.t_max();
  const cplx eT = std::exp(I * kappa * T);
  if (!(std::abs(1.0 - eT) > tol.kappa) || kappa == 0.0)
    throw Error(ErrorCode::degenerate_frequency, "1 - exp(i kappa T) vanishes; pick another kappa");
  const cplx ik = I * kappa;
  const CMatrix& v = u.values();
  CVector W = CVector::Zero(u.n_x());
  CVector W1 = CVector::Zero(u.n_x());
  for (int n = 0; n + 1 < tg.size(); ++n) {
    const cplx e0 = std::exp(ik * tg.node(n));
    const cplx e1 = std::exp(ik * tg.node(n + 1));
    W += ((e1 - e0) / ik * 0.5) * (v.row(n) + v.row(n + 1)).transpose();
    W1 += (0.5 * (e0 + e1)) * (v.row(n + 1) - v.row(n)).transpose();
  }
  const CVector W2 = eT * (v.row(tg.size() - 1) - v.row(0)).transpose();
  CVector u0 = (-ik / (1.0 - eT)) * (W + (W1 - W2) / ik);
  return SpatialSource(u.space_grid(), std::move(u0));
}

}  // namespace transmute
