#pragma once

// Crank-Nicolson solvers for i u_t + A(x,D') u = R(t) f(x) with zero
// Dirichlet data, Neumann trace extraction and the Duhamel representation.

#include "transmute/core_model.hpp"
#include "transmute/tridiagonal.hpp"

namespace transmute {

/// A(x,D') = -(a v')' + b v' + c v on interior nodes, Dirichlet endpoints
/// eliminated. Entry r of each stencil vector belongs to grid node r + 1;
/// sub[0] and super[m-1] couple to the endpoints.
class DiscreteOperator {
 public:
  DiscreteOperator(Grid1D grid, RVector sub, RVector diag, RVector super)
      : grid_(grid), sub_(std::move(sub)), diag_(std::move(diag)), super_(std::move(super)) {
    const auto m = grid_.size() - 2;
    require(sub_.size() == m && diag_.size() == m && super_.size() == m, ErrorCode::dimension,
            "operator size must be n_x - 2");
    bands_ = Tridiagonal<double>(m);
    bands_.diag = diag_;
    for (Eigen::Index r = 0; r < m; ++r) {
      bands_.lower[r] = r > 0 ? sub_[r] : 0.0;
      bands_.upper[r] = r + 1 < m ? super_[r] : 0.0;
    }
  }

  const Grid1D& grid() const { return grid_; }
  /// Interior matrix with the endpoint couplings dropped.
  const Tridiagonal<double>& bands() const { return bands_; }
  int interior_size() const { return static_cast<int>(diag_.size()); }

  /// Applies the stencil to a full nodal vector (endpoint values enter the
  /// first and last interior rows); endpoints of the result are zero.
  CVector apply(const CVector& full) const {
    const int n = grid_.size();
    require(full.size() == n, ErrorCode::dimension, "operator input must have n_x entries");
    CVector out = CVector::Zero(n);
    for (int r = 0; r < n - 2; ++r)
      out[r + 1] = sub_[r] * full[r] + diag_[r] * full[r + 1] + super_[r] * full[r + 2];
    return out;
  }

  /// Same stencil applied to every row of a (time x space) matrix.
  CMatrix apply_rows(const CMatrix& v) const {
    const int n = grid_.size();
    require(v.cols() == n, ErrorCode::dimension, "operator input must have n_x columns");
    CMatrix out = CMatrix::Zero(v.rows(), n);
    for (int r = 0; r < n - 2; ++r)
      out.col(r + 1) = sub_[r] * v.col(r) + diag_[r] * v.col(r + 1) + super_[r] * v.col(r + 2);
    return out;
  }

 private:
  Grid1D grid_;
  RVector sub_, diag_, super_;
  Tridiagonal<double> bands_;
};

/// Conservative second-order discretization with face-averaged a and
/// centered drift.
inline DiscreteOperator assemble_spatial_operator(const CoefficientSet& coeffs, const Grid1D& grid) {
  const int n = grid.size();
  require(coeffs.size() == n, ErrorCode::dimension, "coefficients must be sampled on the grid");
  require(coeffs.ellipticity() > 0.0, ErrorCode::ellipticity,
          "diffusion coefficient a(x) must be positive everywhere");
  const double dx = grid.spacing();
  const double h2 = dx * dx;
  const auto& a = coeffs.a();
  const auto& b = coeffs.b();
  const auto& c = coeffs.c();

  RVector sub(n - 2), diag(n - 2), super(n - 2);
  for (int r = 0; r < n - 2; ++r) {
    const int i = r + 1;
    const double a_minus = 0.5 * (a[i] + a[i - 1]);
    const double a_plus = 0.5 * (a[i] + a[i + 1]);
    sub[r] = -a_minus / h2 - b[i] / (2.0 * dx);
    super[r] = -a_plus / h2 + b[i] / (2.0 * dx);
    diag[r] = (a_minus + a_plus) / h2 + c[i];
  }
  return DiscreteOperator(grid, std::move(sub), std::move(diag), std::move(super));
}

namespace detail {

// One Crank-Nicolson march: (i/dt + A/2) u+ = (i/dt - A/2) u + s_k, where
// s_k is the half-step forcing (may be null).
template <class Forcing>
CMatrix crank_nicolson_march(const DiscreteOperator& op, const TimeGrid& tg, const CVector& start,
                             Forcing&& half_step_forcing) {
  const int nx = op.grid().size();
  const int m = nx - 2;
  const int nt = tg.size();
  const double dt = tg.step();
  const auto& A = op.bands();

  Tridiagonal<cplx> lhs(m);
  for (int r = 0; r < m; ++r) {
    lhs.diag[r] = I / dt + 0.5 * A.diag[r];
    lhs.lower[r] = 0.5 * A.lower[r];
    lhs.upper[r] = 0.5 * A.upper[r];
  }
  const TridiagonalLU lu(lhs);

  CMatrix u = CMatrix::Zero(nt, nx);
  u.row(0) = start.transpose();
  CVector cur = start.segment(1, m);
  CVector rhs(m);
  for (int k = 0; k + 1 < nt; ++k) {
    const CVector Acur = A.apply(cur);
    rhs = (I / dt) * cur - 0.5 * Acur;
    half_step_forcing(k, rhs);
    lu.solve_in_place(rhs);
    cur = rhs;
    u.block(k + 1, 1, 1, m) = cur.transpose();
  }
  return u;
}

}  // namespace detail

/// Crank-Nicolson solution of i u_t + A u = R(t) f, u(0) = 0, with the
/// source taken at half steps as (R_k + R_{k+1}) / 2.
inline ComplexField solve_source_ivp(const DiscreteOperator& op, const SourceTime& R,
                                     const SpatialSource& f, const TimeGrid& tg) {
  require(R.time_grid() == tg, ErrorCode::dimension, "source profile must live on the time grid");
  require(f.grid() == op.grid(), ErrorCode::dimension, "source must live on the operator grid");
  const int m = op.interior_size();
  const CVector fi = f.values().segment(1, m);
  const CVector& r = R.samples();
  CMatrix u = detail::crank_nicolson_march(
      op, tg, CVector::Zero(op.grid().size()),
      [&](int k, CVector& rhs) { rhs += 0.5 * (r[k] + r[k + 1]) * fi; });
  return ComplexField(tg, op.grid(), std::move(u));
}

/// Crank-Nicolson solution of i v_t + A v = 0 with v(0) = u0.
inline ComplexField solve_homogeneous_ivp(const DiscreteOperator& op, const SpatialSource& u0,
                                          const TimeGrid& tg) {
  require(u0.grid() == op.grid(), ErrorCode::dimension, "initial data must live on the operator grid");
  CMatrix v = detail::crank_nicolson_march(op, tg, u0.values(), [](int, CVector&) {});
  return ComplexField(tg, op.grid(), std::move(v));
}

/// y(t,x) = int_0^t R(t - s) v(s,x) ds by causal trapezoid.
inline ComplexField duhamel_convolve(const SourceTime& R, const ComplexField& v) {
  require(R.time_grid() == v.time_grid(), ErrorCode::dimension,
          "Duhamel convolution needs a shared time grid");
  const int nt = v.n_t();
  const int nx = v.n_x();
  const double dt = v.time_grid().step();
  const CVector& r = R.samples();
  const CMatrix vt = v.values().transpose();  // column j = time slice j
  CMatrix yt = CMatrix::Zero(nx, nt);
  for (int n = 1; n < nt; ++n) {
    auto col = yt.col(n);
    col += (0.5 * dt * r[n]) * vt.col(0);
    for (int j = 1; j < n; ++j) col += (dt * r[n - j]) * vt.col(j);
    col += (0.5 * dt * r[0]) * vt.col(n);
  }
  return ComplexField(v.time_grid(), v.space_grid(), yt.transpose());
}

/// Outward normal derivative by second-order one-sided differences:
/// -u_x at x_min, +u_x at x_max.
inline BoundaryTrace neumann_trace(const ComplexField& u, Side side) {
  const int n = u.n_x();
  require(n >= 3, ErrorCode::grid_too_small, "trace needs at least 3 space nodes");
  const double h2 = 2.0 * u.space_grid().spacing();
  const auto& v = u.values();
  CVector left, right;
  if (side != Side::right) left = -(-3.0 * v.col(0) + 4.0 * v.col(1) - v.col(2)) / h2;
  if (side != Side::left) right = (3.0 * v.col(n - 1) - 4.0 * v.col(n - 2) + v.col(n - 3)) / h2;
  return BoundaryTrace(side, u.time_grid(), std::move(left), std::move(right));
}

/// A posteriori residual ||i u_t + A u - R f|| on interior nodes, with u_t by
/// finite_difference_time; discrete L2(Q).
inline double schrodinger_residual(const ComplexField& u, const DiscreteOperator& op,
                                   const SourceTime& R, const SpatialSource& f) {
  require(u.space_grid() == op.grid() && f.grid() == op.grid(), ErrorCode::dimension,
          "residual: grid mismatch");
  require(R.time_grid() == u.time_grid(), ErrorCode::dimension, "residual: time grid mismatch");
  const int nx = u.n_x();
  CMatrix res = I * finite_difference_rows(u.values(), u.time_grid().step()) +
                op.apply_rows(u.values()) - R.samples() * f.values().transpose();
  const auto interior = res.middleCols(1, nx - 2);
  return std::sqrt(u.time_grid().step() * u.space_grid().spacing()) * interior.norm();
}

}  // namespace transmute
