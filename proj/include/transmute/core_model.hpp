#pragma once

// Grids, sampled fields, coefficient sets and the time quadrature shared by
// every solver in the lab. All types are immutable once constructed.

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "transmute/error.hpp"

namespace transmute {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx I{0.0, 1.0};

/// Uniform spatial grid on [x_min, x_max], endpoints included.
class Grid1D {
 public:
  Grid1D(double x_min, double x_max, int n) : x_min_(x_min), x_max_(x_max), n_(n) {
    require(x_min < x_max, ErrorCode::invalid_argument, "Grid1D needs x_min < x_max");
    require(n >= 3, ErrorCode::grid_too_small, "Grid1D needs at least 3 nodes");
    dx_ = (x_max - x_min) / (n - 1);
  }
  explicit Grid1D(int n) : Grid1D(0.0, 1.0, n) {}

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  int size() const { return n_; }
  double spacing() const { return dx_; }
  double node(int i) const { return i == n_ - 1 ? x_max_ : x_min_ + i * dx_; }
  RVector nodes() const {
    RVector x(n_);
    for (int i = 0; i < n_; ++i) x[i] = node(i);
    return x;
  }

  bool operator==(const Grid1D& o) const {
    return n_ == o.n_ && x_min_ == o.x_min_ && x_max_ == o.x_max_;
  }

 private:
  double x_min_, x_max_;
  int n_;
  double dx_;
};

/// Uniform time grid on [0, t_max].
class TimeGrid {
 public:
  TimeGrid(double t_max, int n) : t_max_(t_max), n_(n) {
    require(t_max > 0.0, ErrorCode::invalid_argument, "TimeGrid needs t_max > 0");
    require(n >= 2, ErrorCode::grid_too_small, "TimeGrid needs at least 2 nodes");
    dt_ = t_max / (n - 1);
  }

  double t_max() const { return t_max_; }
  int size() const { return n_; }
  double step() const { return dt_; }
  double node(int k) const { return k == n_ - 1 ? t_max_ : k * dt_; }
  RVector nodes() const {
    RVector t(n_);
    for (int k = 0; k < n_; ++k) t[k] = node(k);
    return t;
  }

  bool operator==(const TimeGrid& o) const { return n_ == o.n_ && t_max_ == o.t_max_; }

 private:
  double t_max_;
  int n_;
  double dt_;
};

/// Composite trapezoid weights for n nodes of spacing h.
inline RVector trapezoid_weights(int n, double h) {
  RVector w = RVector::Constant(n, h);
  w[0] = w[n - 1] = 0.5 * h;
  return w;
}

/// Complex samples on a (time x space) grid; row k is time node k.
class ComplexField {
 public:
  ComplexField(TimeGrid tg, Grid1D sg, CMatrix values)
      : tg_(tg), sg_(sg), values_(std::move(values)) {
    require(values_.rows() == tg_.size() && values_.cols() == sg_.size(), ErrorCode::dimension,
            "field shape must be (n_t, n_x)");
    require(values_.allFinite(), ErrorCode::non_finite, "field entries must be finite");
  }

  static ComplexField zeros(TimeGrid tg, Grid1D sg) {
    return ComplexField(tg, sg, CMatrix::Zero(tg.size(), sg.size()));
  }

  template <class F>
  static ComplexField sample(TimeGrid tg, Grid1D sg, F&& fn) {
    CMatrix v(tg.size(), sg.size());
    for (int k = 0; k < tg.size(); ++k)
      for (int i = 0; i < sg.size(); ++i) v(k, i) = fn(tg.node(k), sg.node(i));
    return ComplexField(tg, sg, std::move(v));
  }

  const TimeGrid& time_grid() const { return tg_; }
  const Grid1D& space_grid() const { return sg_; }
  const CMatrix& values() const { return values_; }
  cplx operator()(int k, int i) const { return values_(k, i); }
  int n_t() const { return tg_.size(); }
  int n_x() const { return sg_.size(); }

  CVector time_series(int i) const { return values_.col(i); }
  CVector profile(int k) const { return values_.row(k).transpose(); }

  /// Discrete L2 norm sqrt(dt dx sum |v|^2) over the whole grid.
  double l2_norm() const { return std::sqrt(tg_.step() * sg_.spacing()) * values_.norm(); }

 private:
  TimeGrid tg_;
  Grid1D sg_;
  CMatrix values_;
};

inline void require_same_grids(const ComplexField& a, const ComplexField& b, const char* where) {
  require(a.time_grid() == b.time_grid() && a.space_grid() == b.space_grid(), ErrorCode::dimension,
          std::string(where) + ": fields live on different grids");
}

/// Real field, used for Carleman weights.
struct RealField {
  TimeGrid time_grid;
  Grid1D space_grid;
  RMatrix values;
};

/// Coefficients of A(x,D')v = -(a v')' + b v' + c v sampled on space nodes.
class CoefficientSet {
 public:
  CoefficientSet(RVector a, RVector b, RVector c)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    require(a_.size() == b_.size() && a_.size() == c_.size(), ErrorCode::dimension,
            "coefficient vectors must share a length");
    require(a_.allFinite() && b_.allFinite() && c_.allFinite(), ErrorCode::non_finite,
            "coefficients must be finite");
    beta0_ = a_.size() > 0 ? a_.minCoeff() : 0.0;
  }

  static CoefficientSet constant(const Grid1D& g, double a, double b = 0.0, double c = 0.0) {
    const int n = g.size();
    return CoefficientSet(RVector::Constant(n, a), RVector::Constant(n, b), RVector::Constant(n, c));
  }

  const RVector& a() const { return a_; }
  const RVector& b() const { return b_; }
  const RVector& c() const { return c_; }
  /// Ellipticity constant min a(x); positive for admissible sets.
  double ellipticity() const { return beta0_; }
  int size() const { return static_cast<int>(a_.size()); }

 private:
  RVector a_, b_, c_;
  double beta0_;
};

/// Temporal source profile R with its derivative samples and R(0).
class SourceTime {
 public:
  SourceTime(TimeGrid tg, CVector samples, CVector derivative)
      : tg_(tg), samples_(std::move(samples)), derivative_(std::move(derivative)) {
    require(samples_.size() == tg_.size() && derivative_.size() == tg_.size(), ErrorCode::dimension,
            "SourceTime samples must match the time grid");
    require(samples_.allFinite() && derivative_.allFinite(), ErrorCode::non_finite,
            "SourceTime samples must be finite");
  }

  template <class F, class DF>
  static SourceTime from_closed_form(TimeGrid tg, F&& r, DF&& dr) {
    CVector s(tg.size()), d(tg.size());
    for (int k = 0; k < tg.size(); ++k) {
      s[k] = r(tg.node(k));
      d[k] = dr(tg.node(k));
    }
    return SourceTime(tg, std::move(s), std::move(d));
  }

  /// Derivative taken by second-order finite differences of the samples.
  static SourceTime from_samples(TimeGrid tg, CVector samples);

  static SourceTime constant(TimeGrid tg, cplx value) {
    return SourceTime(tg, CVector::Constant(tg.size(), value), CVector::Zero(tg.size()));
  }

  const TimeGrid& time_grid() const { return tg_; }
  const CVector& samples() const { return samples_; }
  const CVector& derivative() const { return derivative_; }
  cplx r0() const { return samples_[0]; }
  int size() const { return static_cast<int>(samples_.size()); }

 private:
  TimeGrid tg_;
  CVector samples_;
  CVector derivative_;
};

/// Spatial factor f of the source; zero on the Dirichlet endpoints.
class SpatialSource {
 public:
  SpatialSource(Grid1D g, CVector values) : g_(g), values_(std::move(values)) {
    require(values_.size() == g_.size(), ErrorCode::dimension, "source length must equal n_x");
    require(values_.allFinite(), ErrorCode::non_finite, "source must be finite");
    const double scale = std::max(1.0, values_.cwiseAbs().maxCoeff());
    const int n = g_.size();
    require(std::abs(values_[0]) <= 1e-10 * scale && std::abs(values_[n - 1]) <= 1e-10 * scale,
            ErrorCode::invalid_argument, "source must vanish on the Dirichlet endpoints");
    values_[0] = values_[n - 1] = 0.0;
  }

  template <class F>
  static SpatialSource sample(Grid1D g, F&& fn) {
    CVector v(g.size());
    for (int i = 0; i < g.size(); ++i) v[i] = fn(g.node(i));
    return SpatialSource(g, std::move(v));
  }

  static SpatialSource zeros(Grid1D g) { return SpatialSource(g, CVector::Zero(g.size())); }

  const Grid1D& grid() const { return g_; }
  const CVector& values() const { return values_; }
  double l2_norm() const { return std::sqrt(g_.spacing()) * values_.norm(); }

 private:
  Grid1D g_;
  CVector values_;
};

enum class Side { left, right, both };

inline const char* to_string(Side s) {
  switch (s) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::both: return "both";
  }
  return "?";
}

/// Neumann data on the chosen boundary points. For Side::both the left and
/// right series are both populated; otherwise only the named one is.
class BoundaryTrace {
 public:
  BoundaryTrace(Side side, TimeGrid tg, CVector left, CVector right)
      : side_(side), tg_(tg), left_(std::move(left)), right_(std::move(right)) {
    const auto n = tg_.size();
    const bool want_left = side_ != Side::right;
    const bool want_right = side_ != Side::left;
    require(!want_left || left_.size() == n, ErrorCode::dimension, "left trace length != n_t");
    require(!want_right || right_.size() == n, ErrorCode::dimension, "right trace length != n_t");
    if (!want_left) left_.resize(0);
    if (!want_right) right_.resize(0);
  }

  Side side() const { return side_; }
  const TimeGrid& time_grid() const { return tg_; }
  const CVector& left() const { return left_; }
  const CVector& right() const { return right_; }

  /// Observed series stacked left-then-right.
  CVector stacked() const {
    CVector s(left_.size() + right_.size());
    s << left_, right_;
    return s;
  }

  double l2_norm() const { return std::sqrt(tg_.step()) * stacked().norm(); }

  BoundaryTrace scaled(cplx alpha) const {
    return BoundaryTrace(side_, tg_, alpha * left_, alpha * right_);
  }

 private:
  Side side_;
  TimeGrid tg_;
  CVector left_, right_;
};

/// Trapezoidal approximation of the integral over [0,T] of weight(t) field(t,x), per space node.
inline CVector trapezoid_time_integral(const ComplexField& field, const CVector& weight) {
  require(weight.size() == field.n_t(), ErrorCode::dimension,
          "quadrature weight length must equal n_t");
  const RVector w = trapezoid_weights(field.n_t(), field.time_grid().step());
  const CVector ww = w.cast<cplx>().cwiseProduct(weight);
  return field.values().transpose() * ww;
}

/// Second-order time derivative: centered inside, one-sided at both ends.
inline CMatrix finite_difference_rows(const CMatrix& v, double dt) {
  const auto n = v.rows();
  require(n >= 3, ErrorCode::grid_too_small, "time differencing needs n_t >= 3");
  CMatrix d(n, v.cols());
  const double h2 = 2.0 * dt;
  d.row(0) = (-3.0 * v.row(0) + 4.0 * v.row(1) - v.row(2)) / h2;
  for (Eigen::Index k = 1; k + 1 < n; ++k) d.row(k) = (v.row(k + 1) - v.row(k - 1)) / h2;
  d.row(n - 1) = (3.0 * v.row(n - 1) - 4.0 * v.row(n - 2) + v.row(n - 3)) / h2;
  return d;
}

inline ComplexField finite_difference_time(const ComplexField& field) {
  return ComplexField(field.time_grid(), field.space_grid(),
                      finite_difference_rows(field.values(), field.time_grid().step()));
}

inline CVector finite_difference_series(const CVector& s, double dt) {
  return finite_difference_rows(CMatrix(s), dt).col(0);
}

inline SourceTime SourceTime::from_samples(TimeGrid tg, CVector samples) {
  CVector d = finite_difference_series(samples, tg.step());
  return SourceTime(tg, std::move(samples), std::move(d));
}

/// Relative discrete L2 error ||a - b|| / ||b||.
inline double relative_error(const CMatrix& a, const CMatrix& b) {
  const double nb = b.norm();
  return nb > 0.0 ? (a - b).norm() / nb : (a - b).norm();
}

}  // namespace transmute
