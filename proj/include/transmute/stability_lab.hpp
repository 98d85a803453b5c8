#pragma once

// Carleman weight levels, the Hoelder balance of the weight parameter, the
// logarithmic chaining bound, and the noise-vs-error sweep for the
// one-endpoint inverse source problem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/SVD>

#include "transmute/core_model.hpp"
#include "transmute/forward_solver.hpp"

namespace transmute {

struct CarlemanWeightSpec {
  /// Spatial weight on the space nodes.
  RVector psi_w;
  double lambda = 1.0;
  /// K in psi(x) - K (t - 1)^2.
  double kappa_w = 10.0;

  static CarlemanWeightSpec standard(const Grid1D& g, double lambda = 1.0, double kappa_w = 10.0) {
    RVector psi(g.size());
    for (int i = 0; i < g.size(); ++i) psi[i] = 1.0 + g.node(i) * (1.0 - g.node(i));
    return {std::move(psi), lambda, kappa_w};
  }
};

/// phi = exp(lambda (psi(x) - K (t - 1)^2)) on tg x grid, tg spanning [0, 2].
inline RealField build_weight(const CarlemanWeightSpec& spec, const Grid1D& grid, const TimeGrid& tg) {
  const int nx = grid.size();
  require(spec.psi_w.size() == nx, ErrorCode::dimension, "psi_w must be sampled on the grid");
  require(spec.psi_w.allFinite(), ErrorCode::non_finite, "psi_w must be finite");
  require(spec.lambda > 0.0, ErrorCode::invalid_argument, "lambda must be positive");
  require(spec.kappa_w >= 0.0, ErrorCode::invalid_argument, "kappa_w must be nonnegative");
  require(std::abs(tg.t_max() - 2.0) <= 1e-12, ErrorCode::invalid_argument, "weight lives on t in [0, 2]");
  for (int i = 1; i + 1 < nx; ++i) {
    require(spec.psi_w[i] > 0.0, ErrorCode::invalid_argument, "psi_w must be positive inside");
    require(spec.psi_w[i + 1] != spec.psi_w[i], ErrorCode::invalid_argument,
            "psi_w must have a nonvanishing discrete gradient inside");
  }
  if (spec.lambda * spec.psi_w.maxCoeff() > 700.0)
    throw Error(ErrorCode::weight_overflow, "lambda * max psi exceeds 700");
  RMatrix phi(tg.size(), nx);
  for (int k = 0; k < tg.size(); ++k) {
    const double s = tg.node(k) - 1.0;
    for (int i = 0; i < nx; ++i) phi(k, i) = std::exp(spec.lambda * (spec.psi_w[i] - spec.kappa_w * s * s));
  }
  return {tg, grid, std::move(phi)};
}

struct CarlemanLevels {
  double phi_I, phi_II, phi_M;
  double alpha, beta, theta;

  /// Checks phi_M > phi_I > phi_II.
  static CarlemanLevels from_values(double phi_I, double phi_II, double phi_M) {
    require(phi_M > phi_I && phi_I > phi_II, ErrorCode::invalid_argument,
            "levels must satisfy phi_M > phi_I > phi_II");
    const double a = phi_I - phi_II;
    const double b = phi_M - phi_I;
    return {phi_I, phi_II, phi_M, a, b, a / (a + b)};
  }

  /// alpha = beta, theta = 1/2.
  static CarlemanLevels symmetric(double phi_I, double phi_M) {
    return from_values(phi_I, 2.0 * phi_I - phi_M, phi_M);
  }

  double a() const { return 1.0 / (alpha + beta); }
};

struct LevelMargins {
  double gap = 0.01;
};

inline CarlemanLevels validate_levels(const RealField& phi, const LevelMargins& margins = {}) {
  const TimeGrid& tg = phi.time_grid;
  const int mid = static_cast<int>(std::lround(1.0 / tg.step()));
  require(std::abs(tg.node(mid) - 1.0) <= 1e-12, ErrorCode::invalid_argument,
          "t = 1 must be a node of the weight grid");
  const auto& v = phi.values;
  const double inf_mid = v.row(mid).minCoeff();
  const double ends = std::max(v.row(0).maxCoeff(), v.row(v.rows() - 1).maxCoeff());
  if (!(inf_mid > ends))
    throw Error(ErrorCode::k_too_small, "inf phi(1,.) does not exceed the endpoint levels; raise K");
  const double phi_I = (1.0 - margins.gap) * inf_mid;
  if (!(phi_I > ends))
    throw Error(ErrorCode::k_too_small, "level gap leaves no room below inf phi(1,.); raise K");
  const double phi_II = 0.5 * (ends + phi_I);
  const double phi_M = (1.0 + margins.gap) * v.maxCoeff();
  return CarlemanLevels::from_values(phi_I, phi_II, phi_M);
}

struct HolderResult {
  double s_star;
  double bound;
  double theta;
  /// Smallness failed: bound is the trivial M^2 and s_star is s0.
  bool trivial;
  double decay_term;
  double growth_term;
  /// Exponents of M in the two terms at s_star: 2 + 2 theta and -2 (1 - theta).
  double decay_m_exponent;
  double growth_m_exponent;
  /// M exponent as printed for the combined bound, (1 - theta), and the 2 (1 - theta) reading.
  double printed_m_exponent;
  double corrected_m_exponent;
};

/// Balances e^{-s alpha} M^2 against e^{s beta} eps^2 at s = -log(M^2 eps^2) / (alpha + beta).
inline HolderResult holder_balance(const CarlemanLevels& lv, double M, double eps, double s0 = 1.0) {
  require(M > 0.0 && eps > 0.0, ErrorCode::invalid_argument, "holder_balance needs M > 0 and eps > 0");
  require(lv.alpha > 0.0 && lv.beta > 0.0, ErrorCode::invalid_argument, "levels need alpha, beta > 0");
  const double th = lv.alpha / (lv.alpha + lv.beta);
  HolderResult r{};
  r.theta = th;
  r.decay_m_exponent = 2.0 + 2.0 * th;
  r.growth_m_exponent = -2.0 * (1.0 - th);
  r.printed_m_exponent = 1.0 - th;
  r.corrected_m_exponent = 2.0 * (1.0 - th);
  const double me2 = M * M * eps * eps;
  if (!(me2 < std::min(std::exp(-s0 * (lv.alpha + lv.beta)), 1.0))) {
    r.trivial = true;
    r.s_star = s0;
    r.bound = M * M;
    return r;
  }
  r.s_star = -std::log(me2) / (lv.alpha + lv.beta);
  r.decay_term = std::exp(-r.s_star * lv.alpha) * M * M;
  r.growth_term = std::exp(r.s_star * lv.beta) * eps * eps;
  r.bound = r.decay_term + r.growth_term;
  return r;
}

/// e^{-s alpha} M^2 + e^{s beta} eps^2 at an arbitrary s.
inline double holder_objective(const CarlemanLevels& lv, double M, double eps, double s) {
  return std::exp(-s * lv.alpha) * M * M + std::exp(s * lv.beta) * eps * eps;
}

/// M (int_0^{1/2} eps^{t theta0} dt + eps^{theta0}) in closed form.
inline double log_chain_bound(double theta0, double M, double eps) {
  require(theta0 > 0.0 && theta0 <= 1.0, ErrorCode::invalid_argument, "theta0 must lie in (0, 1]");
  require(M > 0.0, ErrorCode::invalid_argument, "M must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorCode::domain, "log_chain_bound needs 0 < eps < 1");
  const double L = theta0 * std::log(eps);
  const double integral = L == 0.0 ? 0.5 : std::expm1(0.5 * L) / L;
  return M * (integral + std::exp(L));
}

/// Discrete map from sine coefficients to Neumann traces, one forward solve per basis element.
class ForwardMap {
 public:
  ForwardMap(const DiscreteOperator& op, const SourceTime& R, const TimeGrid& tg, int m, Side side)
      : grid_(op.grid()), tg_(tg), side_(side) {
    require(m >= 1, ErrorCode::invalid_argument, "basis size must be >= 1");
    const int nx = grid_.size();
    const double L = grid_.x_max() - grid_.x_min();
    basis_ = RMatrix(nx, m);
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < nx; ++i) basis_(i, k) = std::sin((k + 1) * pi * (grid_.node(i) - grid_.x_min()) / L);
    basis_.row(0).setZero();
    basis_.row(nx - 1).setZero();
    basis_norm2_ = 0.5 * L;
    for (int k = 0; k < m; ++k) {
      const SpatialSource f(grid_, basis_.col(k).cast<cplx>());
      const CVector col = neumann_trace(solve_source_ivp(op, R, f, tg), side).stacked();
      if (k == 0) F_ = CMatrix(col.size(), m);
      F_.col(k) = col;
    }
    svd_.compute(F_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  }

  const CMatrix& matrix() const { return F_; }
  const RMatrix& basis() const { return basis_; }
  const Grid1D& grid() const { return grid_; }
  const TimeGrid& time_grid() const { return tg_; }
  Side side() const { return side_; }
  const RVector& singular_values() const { return svd_.singularValues(); }

  /// Coefficients minimizing ||F c - d||^2 + reg ||f||^2 in discrete L2 norms.
  CVector coefficients(const BoundaryTrace& d, double reg) const {
    require(reg > 0.0, ErrorCode::invalid_argument, "reg must be positive");
    const CVector b = data(d);
    const double mu = reg * basis_norm2_ / tg_.step();
    const RVector& s = svd_.singularValues();
    const CVector beta = svd_.matrixU().adjoint() * b;
    CVector filtered(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) filtered[i] = s[i] / (s[i] * s[i] + mu) * beta[i];
    return svd_.matrixV() * filtered;
  }

  SpatialSource source(const CVector& c) const {
    return SpatialSource(grid_, basis_.cast<cplx>() * c);
  }

  /// Discrete L2(0,T) norm of F c - d.
  double residual(const CVector& c, const BoundaryTrace& d) const {
    return std::sqrt(tg_.step()) * (F_ * c - data(d)).norm();
  }

 private:
  CVector data(const BoundaryTrace& d) const {
    require(d.side() == side_ && d.time_grid() == tg_, ErrorCode::dimension,
            "trace does not match the forward map's side or time grid");
    return d.stacked();
  }

  Grid1D grid_;
  TimeGrid tg_;
  Side side_;
  RMatrix basis_;
  double basis_norm2_ = 0.5;
  CMatrix F_;
  Eigen::JacobiSVD<CMatrix> svd_;
};

inline SpatialSource tikhonov_reconstruct(const BoundaryTrace& trace, const ForwardMap& map, double reg) {
  return map.source(map.coefficients(trace, reg));
}

struct DiscrepancyOptions {
  double log10_reg_min = -40.0;
  double log10_reg_max = 2.0;
  int bisections = 80;
};

/// Largest reg whose residual does not exceed target; the smallest reg when
/// even that overshoots.
inline double discrepancy_reg(const ForwardMap& map, const BoundaryTrace& d, double target,
                              const DiscrepancyOptions& opt = {}) {
  auto resid = [&](double lg) { return map.residual(map.coefficients(d, std::pow(10.0, lg)), d); };
  double lo = opt.log10_reg_min, hi = opt.log10_reg_max;
  if (resid(lo) > target) return std::pow(10.0, lo);
  if (resid(hi) <= target) return std::pow(10.0, hi);
  for (int i = 0; i < opt.bisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    (resid(mid) > target ? hi : lo) = mid;
  }
  return std::pow(10.0, lo);
}

struct SweepConfig {
  int n_x = 101;
  int n_t = 401;
  double horizon = 0.02;
  int basis_size = 30;
  Side side = Side::left;
  std::vector<double> deltas{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  std::uint64_t seed = 20240607;
  int jobs = 1;
  double s0 = 1.0;
  /// Samples of f on the space grid; empty selects sum_{k<=30} sin(k pi x) / k.
  CVector planted;
  /// R(t) = r_const + r_slope t.
  double r_const = 1.0;
  double r_slope = 0.5;
  double lambda = 1.0;
  double kappa_w = 10.0;
  int weight_n_t = 201;
};

struct SweepRow {
  double delta, err, s_used, reg;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double fit_c = 0.0;
  /// Through-origin R^2, 1 - SS_res / sum err^2.
  double fit_r2 = 0.0;
  double fit_r2_centered = 0.0;
  double noiseless_err = 0.0;
  int inversions = 0;
  double condition_number = 0.0;
  /// Set when a row failed; rows holds the results before it.
  std::optional<std::string> failure;
};

inline CVector default_planted_source(const Grid1D& g) {
  CVector f = CVector::Zero(g.size());
  for (int k = 1; k <= 30; ++k)
    for (int i = 0; i < g.size(); ++i) f[i] += std::sin(k * pi * g.node(i)) / k;
  f[0] = f[g.size() - 1] = 0.0;
  return f;
}

/// Complex Gaussian vector of length n from the row seed (master, row).
inline CVector row_noise(std::uint64_t master, int row, Eigen::Index n) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(row)};
  std::mt19937_64 gen(seq);
  std::normal_distribution<double> normal;
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = normal(gen);
    const double im = normal(gen);
    v[i] = cplx(re, im);
  }
  return v;
}

struct FitResult {
  double c, r2, r2_centered;
};

/// Least-squares fit err = c / |log delta|.
inline FitResult fit_log_rate(const std::vector<double>& deltas, const std::vector<double>& errs) {
  require(deltas.size() == errs.size() && !deltas.empty(), ErrorCode::dimension, "fit needs matching rows");
  double sgg = 0.0, seg = 0.0, see = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const double g = 1.0 / std::abs(std::log(deltas[k]));
    sgg += g * g;
    seg += errs[k] * g;
    see += errs[k] * errs[k];
    mean += errs[k];
  }
  mean /= static_cast<double>(errs.size());
  const double c = seg / sgg;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const double e = errs[k] - c / std::abs(std::log(deltas[k]));
    ss_res += e * e;
    ss_tot += (errs[k] - mean) * (errs[k] - mean);
  }
  return {c, see > 0.0 ? 1.0 - ss_res / see : 0.0, ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0};
}

inline SweepResult run_noise_sweep(const SweepConfig& cfg) {
  require(!cfg.deltas.empty(), ErrorCode::invalid_argument, "sweep needs at least one delta");
  for (std::size_t k = 0; k < cfg.deltas.size(); ++k) {
    require(cfg.deltas[k] > 0.0 && cfg.deltas[k] < 1.0, ErrorCode::invalid_argument, "deltas must lie in (0,1)");
    require(k == 0 || cfg.deltas[k] < cfg.deltas[k - 1], ErrorCode::invalid_argument,
            "deltas must be strictly decreasing");
  }
  const Grid1D grid(cfg.n_x);
  const TimeGrid tg(cfg.horizon, cfg.n_t);
  const auto op = assemble_spatial_operator(CoefficientSet::constant(grid, 1.0), grid);
  const double r0 = cfg.r_const, r1 = cfg.r_slope;
  const auto R = SourceTime::from_closed_form(
      tg, [&](double t) { return cplx(r0 + r1 * t); }, [&](double) { return cplx(r1); });
  const SpatialSource f(grid, cfg.planted.size() > 0 ? cfg.planted : default_planted_source(grid));
  const ForwardMap map(op, R, tg, cfg.basis_size, cfg.side);
  const BoundaryTrace clean = neumann_trace(solve_source_ivp(op, R, f, tg), cfg.side);
  const double clean_norm = clean.l2_norm();
  const double f_norm = f.l2_norm();

  const CarlemanLevels levels =
      validate_levels(build_weight(CarlemanWeightSpec::standard(grid, cfg.lambda, cfg.kappa_w), grid,
                                   TimeGrid(2.0, cfg.weight_n_t)));

  SweepResult out;
  const RVector& sv = map.singular_values();
  out.condition_number = sv[0] / sv[sv.size() - 1];
  {
    const double reg = discrepancy_reg(map, clean, 0.0);
    out.noiseless_err = (tikhonov_reconstruct(clean, map, reg).values() - f.values()).norm() /
                        f.values().norm();
  }

  const int nrows = static_cast<int>(cfg.deltas.size());
  std::vector<std::optional<SweepRow>> rows(nrows);
  std::vector<std::string> errors(nrows);
  auto work = [&](int k) {
    try {
      const double delta = cfg.deltas[k];
      CVector noise = row_noise(cfg.seed, k, clean.stacked().size());
      noise *= delta * clean.stacked().norm() / noise.norm();
      const CVector d = clean.stacked() + noise;
      const Eigen::Index nl = clean.left().size();
      const BoundaryTrace noisy(cfg.side, tg, d.head(nl), d.tail(d.size() - nl));
      const double reg = discrepancy_reg(map, noisy, delta * clean_norm);
      const SpatialSource rec = tikhonov_reconstruct(noisy, map, reg);
      const double err = std::sqrt(grid.spacing()) * (rec.values() - f.values()).norm() / f_norm;
      rows[k] = SweepRow{delta, err, holder_balance(levels, 1.0, delta, cfg.s0).s_star, reg};
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  };
  const int jobs = std::max(1, std::min(cfg.jobs, nrows));
  if (jobs == 1) {
    for (int k = 0; k < nrows; ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (int k = w; k < nrows; k += jobs) work(k);
      });
    for (auto& t : pool) t.join();
  }

  for (int k = 0; k < nrows; ++k) {
    if (!rows[k]) {
      out.failure = "row " + std::to_string(k) + ": " + errors[k];
      break;
    }
    out.rows.push_back(*rows[k]);
  }
  if (out.rows.empty()) return out;
  std::vector<double> ds, es;
  for (const auto& r : out.rows) {
    ds.push_back(r.delta);
    es.push_back(r.err);
  }
  const FitResult fit = fit_log_rate(ds, es);
  out.fit_c = fit.c;
  out.fit_r2 = fit.r2;
  out.fit_r2_centered = fit.r2_centered;
  for (std::size_t k = 1; k < es.size(); ++k) out.inversions += es[k] > es[k - 1] ? 1 : 0;
  return out;
}

}  // namespace transmute
