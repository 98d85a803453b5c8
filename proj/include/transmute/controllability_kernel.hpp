#pragma once

// Transmutation kernel K(t, tau) from a penalized boundary controllability
// problem for i K_tau - K_tt = 0, plus an empirical observability probe.
//
// Layout: kernel fields put the pseudo-space variable t on the row axis
// (a TimeGrid on [0, t_len]) and tau on the column axis (a Grid1D on [0, T]).

#include <cmath>

#include "transmute/core_model.hpp"
#include "transmute/tridiagonal.hpp"

namespace transmute {

struct ControlSpec {
  /// Pseudo-space length: 2 for boundary control at t = 2, 3 for control on (2, 3).
  double t_len = 2.0;
  double horizon = 1.0;
  int n_t_space = 81;
  int n_tau = 201;
  /// Boundary profile on the tau nodes.
  CVector psi;
  double penalty = 1e6;
  /// Squared weight of control entries relative to a PDE row.
  double control_reg = 1e-5;
  /// CG stops when ||B^H r|| <= tol ||B^H b||.
  double tol = 1e-8;
  int max_iter = 20000;

  TimeGrid pseudo_space_grid() const { return TimeGrid(t_len, n_t_space); }
  Grid1D tau_grid() const { return Grid1D(0.0, horizon, n_tau); }

  /// Index of the node t = 2, the end of the region where the PDE is enforced.
  int enforced_last() const { return static_cast<int>(std::lround(2.0 / (t_len / (n_t_space - 1)))); }

  void validate() const {
    require(t_len >= 2.0, ErrorCode::invalid_argument, "t_len must be at least 2");
    require(horizon > 0.0, ErrorCode::invalid_argument, "horizon must be positive");
    require(n_t_space >= 3 && n_tau >= 3, ErrorCode::grid_too_small, "kernel grid needs 3 nodes per axis");
    require(psi.size() == n_tau, ErrorCode::dimension, "psi must be sampled on the tau nodes");
    require(psi.allFinite(), ErrorCode::non_finite, "psi must be finite");
    require(penalty > 0.0, ErrorCode::invalid_argument, "penalty must be positive");
    require(control_reg > 0.0, ErrorCode::invalid_argument, "control_reg must be positive");
    require(tol > 0.0 && max_iter > 0, ErrorCode::invalid_argument, "bad CG settings");
    const double dt = t_len / (n_t_space - 1);
    require(std::abs(enforced_last() * dt - 2.0) <= 1e-9, ErrorCode::invalid_argument,
            "t = 2 must be a node of the pseudo-space grid");
  }

  template <class F>
  static ControlSpec with_profile(F&& psi_of_tau, double horizon = 1.0, int n_t_space = 81,
                                  int n_tau = 201, double t_len = 2.0) {
    ControlSpec s;
    s.horizon = horizon;
    s.n_t_space = n_t_space;
    s.n_tau = n_tau;
    s.t_len = t_len;
    const Grid1D g = s.tau_grid();
    s.psi.resize(n_tau);
    for (int n = 0; n < n_tau; ++n) s.psi[n] = psi_of_tau(g.node(n));
    return s;
  }
};

struct KernelReport {
  double pde_residual = 0.0;
  double boundary_mismatch = 0.0;
  double endpoint_mismatch = 0.0;
  double l2_norm = 0.0;
};

struct ControlSolution {
  /// Kernel restricted to t in [0, 2].
  ComplexField kernel;
  /// Kernel on the full pseudo-space interval [0, t_len].
  ComplexField full;
  KernelReport report;
  double objective;
  int iterations;
};

/// C^2 cutoff: 1 at t = 0, 0 for t >= 1.
inline double cutoff(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double t3 = t * t * t;
  return 1.0 - t3 * (10.0 - 15.0 * t + 6.0 * t * t);
}

/// Psi(t, tau) = psi(tau) chi(t) on the full kernel grid.
inline ComplexField extend_profile(const CVector& psi, const ControlSpec& spec) {
  const TimeGrid tg = spec.pseudo_space_grid();
  const Grid1D sg = spec.tau_grid();
  require(psi.size() == sg.size(), ErrorCode::dimension, "psi must be sampled on the tau nodes");
  CMatrix v(tg.size(), sg.size());
  for (int j = 0; j < tg.size(); ++j) v.row(j) = cutoff(tg.node(j)) * psi.transpose();
  return ComplexField(tg, sg, std::move(v));
}

namespace detail {

// The map S: K -> y. Column 0 of y holds K(., 0); for n >= 1 the end rows
// hold K(0, n) and K(last, n) and interior rows the Crank-Nicolson residual
// of step n-1 -> n. S is block lower-bidiagonal with blocks M (diagonal) and
// -N (subdiagonal), so S^{-1} and S^{-H} are marches of tridiagonal solves.
class KernelSystem {
 public:
  explicit KernelSystem(const ControlSpec& s)
      : ns_((s.validate(), s.n_t_space)),
        nt_(s.n_tau),
        dt_(s.t_len / (s.n_t_space - 1)),
        dtau_(s.horizon / (s.n_tau - 1)),
        m_(make_m()),
        lu_(m_),
        lu_h_(m_.adjoint()) {
    j2_ = s.enforced_last();
    const double wp = std::sqrt(dt_ * dtau_);
    const double wc = std::sqrt(s.control_reg) * wp;
    wb_ = std::sqrt(s.penalty * dtau_);
    we_ = std::sqrt(s.penalty * dt_);
    psi0_ = s.psi[0];
    weight_ = RMatrix(ns_, nt_);
    target_ = CMatrix::Zero(ns_, nt_);
    weight_.col(0).setConstant(we_);
    for (int n = 1; n < nt_; ++n) {
      weight_(0, n) = wb_;
      target_(0, n) = s.psi[n];
      // With t_len > 2 the far end is a homogeneous wall; at t_len = 2 it is the control.
      weight_(ns_ - 1, n) = s.t_len > 2.0 ? wb_ : wc;
      for (int j = 1; j + 1 < ns_; ++j) weight_(j, n) = j <= j2_ ? wp : wc;
    }
  }

  int ns() const { return ns_; }
  int nt() const { return nt_; }
  int j2() const { return j2_; }
  double dt() const { return dt_; }
  double dtau() const { return dtau_; }
  Eigen::Index residual_size() const { return Eigen::Index(ns_) * nt_ + ns_ + 1; }

  CMatrix residual_rows(const CMatrix& K) const {
    CMatrix y(ns_, nt_);
    y.col(0) = K.col(0);
    for (int n = 1; n < nt_; ++n) y.col(n) = m_.apply(K.col(n)) - apply_n(K.col(n - 1));
    return y;
  }

  CMatrix march(const CMatrix& y) const {
    CMatrix K(ns_, nt_);
    K.col(0) = y.col(0);
    CVector v(ns_);
    for (int n = 1; n < nt_; ++n) {
      v = y.col(n) + apply_n(K.col(n - 1));
      lu_.solve_in_place(v);
      K.col(n) = v;
    }
    return K;
  }

  CMatrix adjoint_march(const CMatrix& h) const {
    CMatrix g(ns_, nt_);
    CVector v = h.col(nt_ - 1);
    lu_h_.solve_in_place(v);
    g.col(nt_ - 1) = v;
    for (int n = nt_ - 2; n >= 1; --n) {
      v = h.col(n) + apply_nh(g.col(n + 1));
      lu_h_.solve_in_place(v);
      g.col(n) = v;
    }
    g.col(0) = h.col(0) + apply_nh(g.col(1));
    return g;
  }

  // Scaled least-squares operator B acting on x = weight .* y.
  CVector apply_b(const CVector& x) const {
    const CMatrix K = march(unscale(x));
    CVector out(residual_size());
    const Eigen::Index top = Eigen::Index(ns_) * nt_;
    out.head(top) = x;
    out.segment(top, ns_) = we_ * K.col(nt_ - 1);
    out[top + ns_] = wb_ * K(0, 0);
    return out;
  }

  CVector apply_bh(const CVector& z) const {
    const Eigen::Index top = Eigen::Index(ns_) * nt_;
    CMatrix h = CMatrix::Zero(ns_, nt_);
    h.col(nt_ - 1) = we_ * z.segment(top, ns_);
    h(0, 0) += wb_ * z[top + ns_];
    const CMatrix g = adjoint_march(h);
    const CMatrix gs = g.cwiseQuotient(weight_.cast<cplx>());
    return z.head(top) + Eigen::Map<const CVector>(gs.data(), top);
  }

  CVector rhs() const {
    CVector b = CVector::Zero(residual_size());
    const Eigen::Index top = Eigen::Index(ns_) * nt_;
    const CMatrix wt = weight_.cast<cplx>().cwiseProduct(target_);
    b.head(top) = Eigen::Map<const CVector>(wt.data(), top);
    b[top + ns_] = wb_ * psi0_;
    return b;
  }

  CMatrix unscale(const CVector& x) const {
    const CMatrix xm = Eigen::Map<const CMatrix>(x.data(), ns_, nt_);
    return xm.cwiseQuotient(weight_.cast<cplx>());
  }

  double objective(const CMatrix& K) const {
    const CMatrix y = residual_rows(K);
    const double top = (weight_.cast<cplx>().cwiseProduct(y - target_)).squaredNorm();
    return top + we_ * we_ * K.col(nt_ - 1).squaredNorm() + wb_ * wb_ * std::norm(K(0, 0) - psi0_);
  }

 private:
  Tridiagonal<cplx> make_m() const {
    Tridiagonal<cplx> m(ns_);
    const double c = 1.0 / (dt_ * dt_);
    m.diag[0] = m.diag[ns_ - 1] = 1.0;
    for (int j = 1; j + 1 < ns_; ++j) {
      m.diag[j] = I / dtau_ + c;
      m.lower[j] = m.upper[j] = -0.5 * c;
    }
    return m;
  }

  CVector apply_n(const CVector& v) const {
    const double c = 1.0 / (dt_ * dt_);
    const cplx d = I / dtau_ - c;
    CVector out = CVector::Zero(ns_);
    for (int j = 1; j + 1 < ns_; ++j) out[j] = d * v[j] + 0.5 * c * (v[j - 1] + v[j + 1]);
    return out;
  }

  CVector apply_nh(const CVector& g) const {
    const double c = 1.0 / (dt_ * dt_);
    const cplx d = std::conj(I / dtau_ - c);
    auto interior = [&](int j) { return j >= 1 && j + 1 < ns_; };
    CVector out = CVector::Zero(ns_);
    for (int i = 0; i < ns_; ++i) {
      if (interior(i)) out[i] += d * g[i];
      if (interior(i - 1)) out[i] += 0.5 * c * g[i - 1];
      if (interior(i + 1)) out[i] += 0.5 * c * g[i + 1];
    }
    return out;
  }

  int ns_, nt_;
  double dt_, dtau_;
  Tridiagonal<cplx> m_;
  TridiagonalLU lu_, lu_h_;
  int j2_ = 0;
  double wb_ = 0.0, we_ = 0.0;
  cplx psi0_;
  RMatrix weight_;
  CMatrix target_;
};

inline double kernel_pde_rows_norm(const CMatrix& K, double dt, double dtau, int last_row) {
  const double c = 1.0 / (dt * dt);
  double acc = 0.0;
  for (Eigen::Index n = 1; n < K.cols(); ++n)
    for (int j = 1; j <= last_row; ++j) {
      const cplx r = I / dtau * (K(j, n) - K(j, n - 1)) -
                     0.5 * c * (K(j - 1, n) - 2.0 * K(j, n) + K(j + 1, n) + K(j - 1, n - 1) -
                                2.0 * K(j, n - 1) + K(j + 1, n - 1));
      acc += std::norm(r);
    }
  return std::sqrt(dt * dtau * acc);
}

}  // namespace detail

/// Discrete L2 norm of the Crank-Nicolson residual of i K_tau - K_tt over
/// interior pseudo-space nodes with t <= t_max.
inline double kernel_pde_residual(const ComplexField& K, double t_max) {
  const TimeGrid& tg = K.time_grid();
  int last = 0;
  for (int j = 1; j + 1 < tg.size(); ++j)
    if (tg.node(j) <= t_max + 1e-12) last = j;
  return detail::kernel_pde_rows_norm(K.values(), tg.step(), K.space_grid().spacing(), last);
}

/// Least-squares objective of a candidate on the full [0, t_len] x [0, T] grid.
inline double kernel_objective(const ControlSpec& spec, const ComplexField& candidate) {
  require(candidate.time_grid() == spec.pseudo_space_grid() && candidate.space_grid() == spec.tau_grid(),
          ErrorCode::dimension, "candidate must live on the full kernel grid");
  return detail::KernelSystem(spec).objective(candidate.values());
}

inline KernelReport kernel_report(const ComplexField& full, const CVector& psi) {
  const TimeGrid& tg = full.time_grid();
  const double dt = tg.step();
  const double dtau = full.space_grid().spacing();
  const int j2 = static_cast<int>(std::lround(2.0 / dt));
  const CMatrix& K = full.values();
  KernelReport r;
  r.pde_residual = kernel_pde_residual(full, 2.0);
  r.boundary_mismatch = std::sqrt(dtau) * (K.row(0).transpose() - psi).norm();
  double e = 0.0;
  for (int j = 0; j <= j2; ++j) e += std::norm(K(j, 0)) + std::norm(K(j, K.cols() - 1));
  r.endpoint_mismatch = std::sqrt(dt * e);
  r.l2_norm = std::sqrt(dt * dtau) * K.topRows(j2 + 1).norm();
  return r;
}

/// Penalized least squares solved by CGLS on the march-preconditioned,
/// unit-scaled system.
inline ControlSolution solve_control(const ControlSpec& spec) {
  const detail::KernelSystem sys(spec);
  const CVector b = sys.rhs();
  const Eigen::Index n = Eigen::Index(sys.ns()) * sys.nt();
  CVector x = CVector::Zero(n);
  CVector r = b;
  CVector s = sys.apply_bh(r);
  const double s0 = s.norm();
  int iter = 0;
  if (s0 > 0.0) {
    CVector p = s;
    double gamma = s.squaredNorm();
    while (true) {
      if (iter >= spec.max_iter)
        throw ConvergenceError("kernel CG did not converge", std::sqrt(gamma) / s0, iter);
      const CVector q = sys.apply_b(p);
      const double alpha = gamma / q.squaredNorm();
      x += alpha * p;
      r -= alpha * q;
      s = sys.apply_bh(r);
      const double gnew = s.squaredNorm();
      ++iter;
      if (std::sqrt(gnew) <= spec.tol * s0) break;
      p = s + (gnew / gamma) * p;
      gamma = gnew;
    }
  }
  const CMatrix K = sys.march(sys.unscale(x));
  ComplexField full(spec.pseudo_space_grid(), spec.tau_grid(), K);
  const int j2 = sys.j2();
  ComplexField kernel(TimeGrid(2.0, j2 + 1), spec.tau_grid(), K.topRows(j2 + 1));
  KernelReport rep = kernel_report(full, spec.psi);
  return {std::move(kernel), std::move(full), rep, sys.objective(K), iter};
}

/// sin(k pi t / t_len) on n pseudo-space nodes.
inline RVector spectral_mode(int k, double t_len, int n) {
  require(k >= 1, ErrorCode::invalid_argument, "spectral mode index must be >= 1");
  const TimeGrid g(t_len, n);
  RVector e(n);
  for (int j = 0; j < n; ++j) e[j] = std::sin(k * pi * g.node(j) / t_len);
  return e;
}

/// Mode k with its exact phase, p = e^{i (k pi / t_len)^2 tau} sin(k pi t / t_len); solves Mp = 0.
inline ComplexField spectral_solution(int k, const ControlSpec& spec) {
  const RVector e = spectral_mode(k, spec.t_len, spec.n_t_space);
  const Grid1D tau = spec.tau_grid();
  const double w = (k * pi / spec.t_len) * (k * pi / spec.t_len);
  CMatrix v(spec.n_t_space, spec.n_tau);
  for (int n = 0; n < spec.n_tau; ++n) v.col(n) = std::exp(I * w * tau.node(n)) * e.cast<cplx>();
  return ComplexField(spec.pseudo_space_grid(), tau, std::move(v));
}

/// ||p||_G / (||p||_{G1} + ||Mp||_G) with G1 the nodes t >= 2.
inline double observability_ratio(const ComplexField& p, const ControlSpec& spec) {
  require(p.time_grid() == spec.pseudo_space_grid() && p.space_grid() == spec.tau_grid(),
          ErrorCode::dimension, "p must live on the (0, t_len) x (0, T) grid");
  const TimeGrid& tg = p.time_grid();
  const double dt = tg.step();
  const double dtau = p.space_grid().spacing();
  const double w = std::sqrt(dt * dtau);
  const CMatrix& v = p.values();
  double g1 = 0.0;
  for (int j = 0; j < tg.size(); ++j)
    if (tg.node(j) >= 2.0 - 1e-12) g1 += v.row(j).squaredNorm();
  const double mp = detail::kernel_pde_rows_norm(v, dt, dtau, tg.size() - 2);
  const double denom = w * std::sqrt(g1) + mp;
  if (!(denom >= 1e-14)) throw Error(ErrorCode::degenerate_input, "observability denominator vanishes");
  return w * v.norm() / denom;
}

}  // namespace transmute
