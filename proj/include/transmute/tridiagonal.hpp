#pragma once

#include <cmath>
#include <type_traits>
#include <utility>

#include "transmute/core_model.hpp"

namespace transmute {

/// Tridiagonal matrix stored by bands. lower[i] sits at (i, i-1) and
/// upper[i] at (i, i+1); lower[0] and upper[n-1] are ignored.
template <class Scalar>
struct Tridiagonal {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vec lower, diag, upper;

  explicit Tridiagonal(Eigen::Index n = 0)
      : lower(Vec::Zero(n)), diag(Vec::Zero(n)), upper(Vec::Zero(n)) {}

  Eigen::Index size() const { return diag.size(); }

  template <class V>
  auto apply(const V& x) const {
    using Out = Eigen::Matrix<typename V::Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index n = size();
    Out y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto s = diag[i] * x[i];
      if (i > 0) s += lower[i] * x[i - 1];
      if (i + 1 < n) s += upper[i] * x[i + 1];
      y[i] = s;
    }
    return y;
  }

  Tridiagonal adjoint() const {
    const Eigen::Index n = size();
    Tridiagonal t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      t.diag[i] = conj_if(diag[i]);
      if (i > 0) t.lower[i] = conj_if(upper[i - 1]);
      if (i + 1 < n) t.upper[i] = conj_if(lower[i + 1]);
    }
    return t;
  }

 private:
  static Scalar conj_if(Scalar s) {
    if constexpr (std::is_same_v<Scalar, cplx>) return std::conj(s);
    else return s;
  }
};

/// LU factorization of a complex tridiagonal matrix without pivoting,
/// factored once and reused for every right-hand side.
class TridiagonalLU {
 public:
  explicit TridiagonalLU(const Tridiagonal<cplx>& m)
      : lower_(m.lower), upper_(m.upper), pivot_(m.diag.size()) {
    const Eigen::Index n = m.size();
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(m.diag[i]));
    for (Eigen::Index i = 0; i < n; ++i) {
      cplx p = m.diag[i];
      if (i > 0) p -= lower_[i] * upper_[i - 1] / pivot_[i - 1];
      if (!(std::abs(p) > 1e-14 * scale) || !std::isfinite(std::abs(p)))
        throw Error(ErrorCode::singular_system, "tridiagonal factorization hit a zero pivot");
      pivot_[i] = p;
    }
  }

  Eigen::Index size() const { return pivot_.size(); }

  /// Solves in place.
  void solve_in_place(CVector& x) const {
    const Eigen::Index n = size();
    require(x.size() == n, ErrorCode::dimension, "tridiagonal solve size mismatch");
    for (Eigen::Index i = 1; i < n; ++i) x[i] -= lower_[i] / pivot_[i - 1] * x[i - 1];
    x[n - 1] /= pivot_[n - 1];
    for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = (x[i] - upper_[i] * x[i + 1]) / pivot_[i];
  }

  CVector solve(CVector x) const {
    solve_in_place(x);
    return x;
  }

 private:
  CVector lower_, upper_, pivot_;
};

}  // namespace transmute
