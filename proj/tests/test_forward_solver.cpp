#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "transmute/forward_solver.hpp"

using namespace transmute;

namespace {

DiscreteOperator laplacian(const Grid1D& g, double c = 0.0) {
  return assemble_spatial_operator(CoefficientSet::constant(g, 1.0, 0.0, c), g);
}

SpatialSource sine(const Grid1D& g, int k = 1) {
  return SpatialSource::sample(g, [k](double x) { return cplx(std::sin(k * pi * x)); });
}

// u = (1 - e^{i pi^2 t}) sin(pi x) / pi^2 solves i u_t - u_xx = sin(pi x), u(0) = 0.
double source_eigen_error(int nx, int nt, double T = 0.5) {
  const Grid1D g(nx);
  const TimeGrid tg(T, nt);
  const auto u = solve_source_ivp(laplacian(g), SourceTime::constant(tg, 1.0), sine(g), tg);
  const auto exact = ComplexField::sample(tg, g, [](double t, double x) {
    return (1.0 - std::exp(I * pi * pi * t)) * std::sin(pi * x) / (pi * pi);
  });
  return relative_error(u.values(), exact.values());
}

}  // namespace

TEST(AssembleSpatialOperator, LaplacianEigenmode) {
  auto err = [](int n) {
    const Grid1D g(n);
    const CVector s = sine(g).values();
    return (laplacian(g).apply(s) - pi * pi * s).norm() / (pi * pi * s.norm());
  };
  const double e1 = err(41), e2 = err(81);
  EXPECT_LT(e1, 1e-3);
  EXPECT_NEAR(e1 / e2, 4.0, 0.2);
}

TEST(AssembleSpatialOperator, ShiftedEigenvalue) {
  const Grid1D g(201);
  const CVector s = sine(g).values();
  const CVector r = laplacian(g, 5.0).apply(s);
  EXPECT_LT((r - (pi * pi + 5.0) * s).norm() / s.norm(), 1e-3);
}

TEST(AssembleSpatialOperator, ZeroInZeroOut) {
  const Grid1D g(17);
  EXPECT_EQ(laplacian(g).apply(CVector::Zero(17)).norm(), 0.0);
}

TEST(AssembleSpatialOperator, SymmetricPositiveDefiniteForPureDiffusion) {
  const Grid1D g(31);
  RVector a(31);
  for (int i = 0; i < 31; ++i) a[i] = 1.0 + g.node(i) * g.node(i);
  const auto op = assemble_spatial_operator(CoefficientSet(a, RVector::Zero(31), RVector::Zero(31)), g);
  const auto& B = op.bands();
  RMatrix dense = RMatrix::Zero(29, 29);
  for (int r = 0; r < 29; ++r) {
    dense(r, r) = B.diag[r];
    if (r > 0) dense(r, r - 1) = B.lower[r];
    if (r + 1 < 29) dense(r, r + 1) = B.upper[r];
  }
  EXPECT_LE((dense - dense.transpose()).norm(), 1e-12 * dense.norm());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<RMatrix>(dense).eigenvalues().minCoeff(), 0.0);
}

TEST(AssembleSpatialOperator, RejectsNonEllipticCoefficients) {
  const Grid1D g(11);
  RVector a = RVector::Ones(11);
  a[4] = 0.0;
  try {
    assemble_spatial_operator(CoefficientSet(a, RVector::Zero(11), RVector::Zero(11)), g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ellipticity);
  }
}

TEST(SolveSourceIvp, ZeroSourceGivesZero) {
  const Grid1D g(21);
  const TimeGrid tg(0.3, 31);
  const auto op = laplacian(g);
  EXPECT_EQ(solve_source_ivp(op, SourceTime::constant(tg, 1.0), SpatialSource::zeros(g), tg).values().norm(), 0.0);
  EXPECT_EQ(solve_source_ivp(op, SourceTime::constant(tg, 0.0), sine(g), tg).values().norm(), 0.0);
}

TEST(SolveSourceIvp, EigenmodeSecondOrder) {
  const double e1 = source_eigen_error(101, 1001);
  const double e2 = source_eigen_error(201, 2001);
  EXPECT_LT(e2, 1e-3);
  EXPECT_NEAR(e1 / e2, 4.0, 0.3);
}

TEST(SolveSourceIvp, RefiningTimeNeverIncreasesError) {
  double prev = source_eigen_error(101, 51);
  for (int nt : {101, 201, 401, 801}) {
    const double e = source_eigen_error(101, nt);
    EXPECT_LE(e, prev * (1.0 + 1e-12)) << nt;
    prev = e;
  }
}

TEST(SolveSourceIvp, LinearInSourceAndProfile) {
  const Grid1D g(41);
  const TimeGrid tg(0.2, 81);
  const auto op = laplacian(g);
  const auto R1 = SourceTime::from_closed_form(
      tg, [](double t) { return cplx(1.0 + t); }, [](double) { return cplx(1.0); });
  const auto R2 = SourceTime::from_closed_form(
      tg, [](double t) { return std::exp(I * t); }, [](double t) { return I * std::exp(I * t); });
  const auto f1 = sine(g, 1), f2 = sine(g, 2);
  const cplx a(0.5, 2.0), b(-1.5, 0.25);
  const SpatialSource fa(g, a * f1.values() + b * f2.values());
  const CMatrix lhs = solve_source_ivp(op, R1, fa, tg).values();
  const CMatrix rhs = a * solve_source_ivp(op, R1, f1, tg).values() + b * solve_source_ivp(op, R1, f2, tg).values();
  EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
  const SourceTime Ra(tg, a * R1.samples() + b * R2.samples(), a * R1.derivative() + b * R2.derivative());
  const CMatrix lhs2 = solve_source_ivp(op, Ra, f1, tg).values();
  const CMatrix rhs2 = a * solve_source_ivp(op, R1, f1, tg).values() + b * solve_source_ivp(op, R2, f1, tg).values();
  EXPECT_LE((lhs2 - rhs2).norm(), 1e-12 * rhs2.norm());
}

TEST(SolveHomogeneousIvp, ZeroDataGivesZero) {
  const Grid1D g(21);
  const TimeGrid tg(0.3, 31);
  EXPECT_EQ(solve_homogeneous_ivp(laplacian(g), SpatialSource::zeros(g), tg).values().norm(), 0.0);
}

TEST(SolveHomogeneousIvp, EigenmodePhaseRotation) {
  auto err = [](int nx, int nt) {
    const Grid1D g(nx);
    const TimeGrid tg(0.5, nt);
    const auto v = solve_homogeneous_ivp(laplacian(g), sine(g), tg);
    const auto exact = ComplexField::sample(tg, g, [](double t, double x) {
      return std::exp(I * pi * pi * t) * std::sin(pi * x);
    });
    return relative_error(v.values(), exact.values());
  };
  const double e1 = err(101, 1001), e2 = err(201, 2001);
  EXPECT_LT(e2, 1e-3);
  EXPECT_NEAR(e1 / e2, 4.0, 0.3);
}

TEST(SolveHomogeneousIvp, UnitaryForSelfAdjointOperator) {
  const Grid1D g(81);
  const TimeGrid tg(1.0, 401);
  RVector a(81), c(81);
  for (int i = 0; i < 81; ++i) {
    a[i] = 1.0 + 0.5 * std::sin(3.0 * g.node(i));
    c[i] = 4.0 * g.node(i);
  }
  const auto op = assemble_spatial_operator(CoefficientSet(a, RVector::Zero(81), c), g);
  const auto u0 = SpatialSource::sample(g, [](double x) { return cplx(x * (1 - x), std::sin(2 * pi * x)); });
  const auto v = solve_homogeneous_ivp(op, u0, tg);
  const double n0 = v.values().row(0).norm();
  for (int k = 1; k < tg.size(); ++k) EXPECT_NEAR(v.values().row(k).norm() / n0, 1.0, 1e-10);
}

TEST(DuhamelConvolve, ZeroProfileGivesZero) {
  const TimeGrid tg(1.0, 11);
  const auto v = ComplexField::sample(tg, Grid1D(5), [](double t, double x) { return cplx(t, x); });
  EXPECT_EQ(duhamel_convolve(SourceTime::constant(tg, 0.0), v).values().norm(), 0.0);
}

TEST(DuhamelConvolve, ConstantsIntegrateExactly) {
  const TimeGrid tg(1.0, 11);
  const Grid1D g(5);
  const auto v = ComplexField::sample(tg, g, [](double, double x) { return cplx(1.0 + x, -x); });
  const auto y = duhamel_convolve(SourceTime::constant(tg, 1.0), v);
  for (int k = 0; k < 11; ++k)
    for (int i = 0; i < 5; ++i) {
      const double t = tg.node(k), x = g.node(i);
      EXPECT_NEAR(std::abs(y(k, i) - t * cplx(1.0 + x, -x)), 0.0, 1e-14);
    }
}

TEST(DuhamelConvolve, MatchesSourceSolveAtEigenmodeResolution) {
  const Grid1D g(201);
  const TimeGrid tg(0.5, 2001);
  const auto op = laplacian(g);
  const auto f = sine(g);
  const auto R = SourceTime::constant(tg, 1.0);
  const auto v = solve_homogeneous_ivp(op, SpatialSource(g, -I * f.values()), tg);
  EXPECT_LE(relative_error(duhamel_convolve(R, v).values(), solve_source_ivp(op, R, f, tg).values()), 5e-3);
}

TEST(DuhamelConvolve, SecondOrderForVaryingProfile) {
  auto err = [](int nt) {
    const Grid1D g(41);
    const TimeGrid tg(0.5, nt);
    const auto op = laplacian(g);
    const auto f = SpatialSource::sample(g, [](double x) { return cplx(std::sin(pi * x) + 0.3 * std::sin(3 * pi * x)); });
    const auto R = SourceTime::from_closed_form(
        tg, [](double t) { return cplx(1.0 + std::sin(4.0 * t)); }, [](double t) { return cplx(4.0 * std::cos(4.0 * t)); });
    const auto v = solve_homogeneous_ivp(op, SpatialSource(g, -I * f.values()), tg);
    return relative_error(duhamel_convolve(R, v).values(), solve_source_ivp(op, R, f, tg).values());
  };
  const double e1 = err(101), e2 = err(201);
  EXPECT_LT(e2, 5e-3);
  EXPECT_GT(e1 / e2, 3.0);
}

TEST(NeumannTrace, ZeroField) {
  const auto u = ComplexField::zeros(TimeGrid(1.0, 5), Grid1D(7));
  EXPECT_EQ(neumann_trace(u, Side::both).stacked().norm(), 0.0);
}

TEST(NeumannTrace, FirstModeOutwardNormal) {
  const TimeGrid tg(1.0, 6);
  const Grid1D g(401);
  auto gt = [](double t) { return cplx(1.0 + t, t * t); };
  const auto u = ComplexField::sample(tg, g, [&](double t, double x) { return gt(t) * std::sin(pi * x); });
  const auto tr = neumann_trace(u, Side::both);
  for (int k = 0; k < 6; ++k) {
    const cplx want = -pi * gt(tg.node(k));
    EXPECT_LT(std::abs(tr.left()[k] - want), 1e-4 * std::abs(want));
    EXPECT_LT(std::abs(tr.right()[k] - want), 1e-4 * std::abs(want));
  }
}

TEST(NeumannTrace, SecondModeOutwardNormal) {
  const TimeGrid tg(1.0, 4);
  const Grid1D g(401);
  const auto u = ComplexField::sample(tg, g, [](double t, double x) { return (1.0 + t) * std::sin(2 * pi * x); });
  const auto tr = neumann_trace(u, Side::both);
  for (int k = 0; k < 4; ++k) {
    const double gt = 1.0 + tg.node(k);
    EXPECT_NEAR(tr.left()[k].real(), -2 * pi * gt, 2e-4 * 2 * pi * gt);
    EXPECT_NEAR(tr.right()[k].real(), 2 * pi * gt, 2e-4 * 2 * pi * gt);
  }
  EXPECT_EQ(neumann_trace(u, Side::left).right().size(), 0);
}

TEST(SchrodingerResidual, SmallForSolverOutput) {
  const Grid1D g(101);
  const TimeGrid tg(0.5, 1001);
  const auto op = laplacian(g);
  const auto f = sine(g);
  const auto R = SourceTime::constant(tg, 1.0);
  const auto u = solve_source_ivp(op, R, f, tg);
  EXPECT_LT(schrodinger_residual(u, op, R, f), 1e-3 * u.l2_norm() * pi * pi);
  EXPECT_EQ(schrodinger_residual(ComplexField::zeros(tg, g), op, R, SpatialSource::zeros(g)), 0.0);
}

TEST(SchrodingerResidual, GrowsLinearlyUnderPerturbation) {
  const Grid1D g(41);
  const TimeGrid tg(0.2, 201);
  const auto op = laplacian(g);
  const auto f = sine(g);
  const auto R = SourceTime::constant(tg, 1.0);
  const auto u = solve_source_ivp(op, R, f, tg);
  std::mt19937 gen(11);
  std::normal_distribution<double> n;
  CMatrix noise(tg.size(), g.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = cplx(n(gen), n(gen));
  noise.col(0).setZero();
  noise.col(g.size() - 1).setZero();
  const double base = schrodinger_residual(u, op, R, f);
  double prev = base;
  for (double eps : {1e-4, 1e-3, 1e-2}) {
    const double r = schrodinger_residual(ComplexField(tg, g, u.values() + eps * noise), op, R, f);
    EXPECT_GT(r, prev);
    prev = r;
  }
  const double r2 = schrodinger_residual(ComplexField(tg, g, u.values() + 2e-2 * noise), op, R, f);
  EXPECT_NEAR((r2 - base) / (prev - base), 2.0, 0.1);
}
