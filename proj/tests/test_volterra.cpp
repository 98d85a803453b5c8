#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "transmute/volterra.hpp"

using namespace transmute;

namespace {

SourceTime one_plus_t_sin(const TimeGrid& tg) {
  return SourceTime::from_closed_form(
      tg, [](double t) { return cplx(1.0 + t + std::sin(t)); }, [](double t) { return cplx(1.0 + std::cos(t)); });
}

CVector smooth_series(const TimeGrid& tg) {
  CVector v(tg.size());
  for (int k = 0; k < tg.size(); ++k) v[k] = std::exp(I * tg.node(k)) + tg.node(k) * tg.node(k);
  return v;
}

DiscreteOperator laplacian(const Grid1D& g) {
  return assemble_spatial_operator(CoefficientSet::constant(g, 1.0), g);
}

// Direct O(n^2) discrete convolution used as an independent support oracle.
RVector discrete_convolution(const RVector& a, const RVector& b, double dt) {
  RVector c = RVector::Zero(a.size());
  for (Eigen::Index n = 0; n < a.size(); ++n)
    for (Eigen::Index j = 0; j <= n; ++j) c[n] += dt * a[j] * b[n - j];
  return c;
}

}  // namespace

TEST(ApplyK, IdentityForUnitProfile) {
  const TimeGrid tg(1.0, 51);
  const CVector v = smooth_series(tg);
  EXPECT_EQ((apply_K(SourceTime::constant(tg, 1.0), v) - v).norm(), 0.0);
}

TEST(ApplyK, OnePlusTOnOnes) {
  const TimeGrid tg(2.0, 41);
  const auto R = SourceTime::from_closed_form(
      tg, [](double t) { return cplx(1.0 + t); }, [](double) { return cplx(1.0); });
  const CVector out = apply_K(R, CVector::Ones(41));
  for (int k = 0; k < 41; ++k) EXPECT_NEAR(std::abs(out[k] - (1.0 + tg.node(k))), 0.0, 1e-13);
}

TEST(ApplyK, ZeroAndMismatch) {
  const TimeGrid tg(1.0, 21);
  const auto R = one_plus_t_sin(tg);
  EXPECT_EQ(apply_K(R, CVector::Zero(21)).norm(), 0.0);
  EXPECT_THROW(apply_K(R, CVector::Zero(20)), Error);
}

TEST(ApplyK, Linear) {
  const TimeGrid tg(1.0, 101);
  const auto R = one_plus_t_sin(tg);
  const CVector v = CVector::Random(101), w = CVector::Random(101);
  const cplx a(1.5, -0.5), b(0.0, 2.0);
  const CVector lhs = apply_K(R, a * v + b * w);
  const CVector rhs = a * apply_K(R, v) + b * apply_K(R, w);
  EXPECT_LE((lhs - rhs).norm(), 1e-13 * rhs.norm());
}

TEST(InvertK, IdentityForUnitProfile) {
  const TimeGrid tg(1.0, 31);
  const CVector g = smooth_series(tg);
  EXPECT_LE((invert_K(SourceTime::constant(tg, 1.0), g) - g).norm(), 1e-15);
}

TEST(InvertK, RoundTrip) {
  const TimeGrid tg(1.0, 1001);
  const auto R = one_plus_t_sin(tg);
  const CVector v = smooth_series(tg);
  EXPECT_LE((invert_K(R, apply_K(R, v)) - v).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((apply_K(R, invert_K(R, v)) - v).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InvertK, RandomProfilesRoundTrip) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const TimeGrid tg(1.0, 301);
  for (int trial = 0; trial < 5; ++trial) {
    const double c1 = u(gen), c2 = u(gen);
    const auto R = SourceTime::from_closed_form(
        tg, [&](double t) { return cplx(2.0 + c1 * t, c2 * t * t); }, [&](double t) { return cplx(c1, 2.0 * c2 * t); });
    const CVector v = CVector::Random(301);
    EXPECT_LE((invert_K(R, apply_K(R, v)) - v).cwiseAbs().maxCoeff(), 1e-10) << trial;
  }
}

TEST(InvertK, SingularOnset) {
  const TimeGrid tg(1.0, 11);
  const auto R = SourceTime::from_closed_form(tg, [](double t) { return cplx(t); }, [](double) { return cplx(1.0); });
  try {
    invert_K(R, CVector::Ones(11));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular_operator);
  }
  EXPECT_THROW(invert_K(SourceTime::constant(tg, 0.0), CVector::Ones(11)), Error);
}

TEST(RecoverZ, ZeroFieldGivesZero) {
  const auto u = ComplexField::zeros(TimeGrid(1.0, 11), Grid1D(7));
  EXPECT_EQ(recover_z(u, SourceTime::constant(TimeGrid(1.0, 11), 1.0)).values().norm(), 0.0);
}

TEST(RecoverZ, EigenmodeClosedForm) {
  const Grid1D g(201);
  const TimeGrid tg(0.5, 2001);
  const auto f = SpatialSource::sample(g, [](double x) { return cplx(std::sin(pi * x)); });
  const auto R = SourceTime::constant(tg, 1.0);
  const auto z = recover_z(solve_source_ivp(laplacian(g), R, f, tg), R);
  const auto exact = ComplexField::sample(tg, g, [](double t, double x) {
    return -I * std::exp(I * pi * pi * t) * std::sin(pi * x);
  });
  EXPECT_LT(relative_error(z.values(), exact.values()), 2e-3);
}

TEST(RecoverZ, RepresentationReproducesField) {
  const Grid1D g(101);
  const TimeGrid tg(0.5, 2001);
  const auto f = SpatialSource::sample(g, [](double x) { return cplx(std::sin(pi * x) + 0.3 * std::sin(3 * pi * x)); });
  const auto R = SourceTime::from_closed_form(
      tg, [](double t) { return cplx(1.0 + 0.5 * t); }, [](double) { return cplx(0.5); });
  const auto u = solve_source_ivp(laplacian(g), R, f, tg);
  const auto z = recover_z(u, R);
  EXPECT_LE(relative_error(convolve_with_profile(R, z).values(), u.values()), 1e-3);
}

TEST(ExtractSource, AlgebraicIdentity) {
  const TimeGrid tg(1.0, 3);
  const Grid1D g(33);
  const auto z = ComplexField::sample(tg, g, [](double, double x) { return -I * std::sin(pi * x); });
  const auto f = extract_source(z);
  for (int i = 0; i < 33; ++i) EXPECT_NEAR(std::abs(f.values()[i] - std::sin(pi * g.node(i))), 0.0, 1e-15);
  EXPECT_EQ(extract_source(ComplexField::zeros(tg, g)).values().norm(), 0.0);
}

TEST(IdentifySource, PlantedMixture) {
  const Grid1D g(201);
  const TimeGrid tg(0.5, 2001);
  const auto f = SpatialSource::sample(g, [](double x) { return cplx(std::sin(pi * x) + 0.3 * std::sin(3 * pi * x)); });
  const auto R = SourceTime::from_closed_form(
      tg, [](double t) { return cplx(1.0 + 0.5 * t); }, [](double) { return cplx(0.5); });
  const auto id = identify_source(solve_source_ivp(laplacian(g), R, f, tg), R);
  EXPECT_FALSE(id.reduced);
  EXPECT_LE((id.f.values() - f.values()).norm() / f.values().norm(), 1e-2);
}

TEST(IdentifySource, VanishingOnsetIsLifted) {
  const Grid1D g(101);
  const TimeGrid tg(0.5, 2001);
  const auto f = SpatialSource::sample(g, [](double x) { return cplx(std::sin(pi * x)); });
  const auto Rt = antiderivative_reduction(SourceTime::from_closed_form(
      tg, [](double t) { return cplx(1.0 + 0.5 * t); }, [](double) { return cplx(0.5); }));
  const auto id = identify_source(solve_source_ivp(laplacian(g), Rt, f, tg), Rt);
  EXPECT_TRUE(id.reduced);
  EXPECT_LE((id.f.values() - f.values()).norm() / f.values().norm(), 1e-2);
}

TEST(HomogeneousResidual, ZeroField) {
  const Grid1D g(11);
  EXPECT_EQ(homogeneous_residual_of_z(ComplexField::zeros(TimeGrid(1.0, 5), g), laplacian(g)), 0.0);
}

TEST(HomogeneousResidual, SmallForPipelineLargeForNoise) {
  const Grid1D g(101);
  const TimeGrid tg(0.5, 1001);
  const auto op = laplacian(g);
  const auto f = SpatialSource::sample(g, [](double x) { return cplx(std::sin(pi * x)); });
  const auto R = SourceTime::constant(tg, 1.0);
  const auto z = recover_z(solve_source_ivp(op, R, f, tg), R);
  const double res = homogeneous_residual_of_z(z, op);
  EXPECT_LT(res, 1e-2 * pi * pi * z.l2_norm());

  std::mt19937 gen(2);
  std::normal_distribution<double> n;
  const auto noise = ComplexField::sample(tg, g, [&](double, double) { return cplx(n(gen), n(gen)); });
  const double rn = homogeneous_residual_of_z(noise, op);
  EXPECT_GT(rn, 10.0 * noise.l2_norm());
}

TEST(ConvolutionVanishSupport, ShiftedSupports) {
  const int n = 1001;
  const double T = 1.0, dt = T / (n - 1);
  RVector Rs(n), Zs(n);
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    Rs[k] = t > 0.3 ? t - 0.3 : 0.0;
    Zs[k] = t > 0.7 ? t - 0.7 : 0.0;
  }
  const RVector c = discrete_convolution(Rs, Zs, dt);
  EXPECT_LE(c.cwiseAbs().maxCoeff(), 1e-12);
  const auto rep = convolution_vanish_support(Rs, Zs, T);
  EXPECT_NEAR(rep.lambda_hat, 0.3, 2 * dt);
  EXPECT_NEAR(rep.r_hat, 0.7, 2 * dt);
  EXPECT_TRUE(rep.sum_ok);
}

TEST(ConvolutionVanishSupport, NonzeroOnsetForcesRHatT) {
  const int n = 201;
  const RVector Rs = RVector::Ones(n);
  const RVector Zs = RVector::Zero(n);
  const auto rep = convolution_vanish_support(Rs, Zs, 1.0);
  EXPECT_EQ(rep.lambda_hat, 0.0);
  EXPECT_EQ(rep.r_hat, 1.0);
  EXPECT_TRUE(rep.sum_ok);
}

TEST(ConvolutionVanishSupport, BothZero) {
  const auto rep = convolution_vanish_support(RVector::Zero(11), RVector::Zero(11), 2.0);
  EXPECT_EQ(rep.lambda_hat, 2.0);
  EXPECT_EQ(rep.r_hat, 2.0);
  EXPECT_TRUE(rep.sum_ok);
}

TEST(ConvolutionVanishSupport, RandomSupportedPairs) {
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 401;
  const double dt = 1.0 / (n - 1);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const double a = u(gen), b = u(gen);
    RVector Rs(n), Zs(n);
    for (int k = 0; k < n; ++k) {
      const double t = k * dt;
      Rs[k] = t > a ? 1.0 + u(gen) : 0.0;
      Zs[k] = t > b ? 1.0 + u(gen) : 0.0;
    }
    const RVector c = discrete_convolution(Rs, Zs, dt);
    if (c.cwiseAbs().maxCoeff() > 1e-12) continue;
    ++checked;
    const auto rep = convolution_vanish_support(Rs, Zs, 1.0);
    EXPECT_GE(rep.lambda_hat + rep.r_hat, 1.0 - 2 * dt) << a << ' ' << b;
    EXPECT_TRUE(rep.sum_ok);
  }
  EXPECT_GT(checked, 0);
}

TEST(ConvolutionVanishSupport, RejectsNegativeProfile) {
  RVector Zs = RVector::Zero(5);
  Zs[2] = -1.0;
  EXPECT_THROW(convolution_vanish_support(RVector::Ones(5), Zs, 1.0), Error);
}

TEST(AntiderivativeReduction, Examples) {
  const TimeGrid tg(2.0, 401);
  const auto one = antiderivative_reduction(SourceTime::constant(tg, 1.0));
  for (int k = 0; k < tg.size(); ++k) EXPECT_NEAR(std::abs(one.samples()[k] - tg.node(k)), 0.0, 1e-13);
  EXPECT_EQ(one.r0(), cplx(0.0));
  EXPECT_EQ(antiderivative_reduction(SourceTime::constant(tg, 0.0)).samples().norm(), 0.0);

  auto err = [](int nt) {
    const TimeGrid g(2.0, nt);
    const auto c = antiderivative_reduction(SourceTime::from_closed_form(
        g, [](double t) { return cplx(std::cos(t)); }, [](double t) { return cplx(-std::sin(t)); }));
    double e = 0.0;
    for (int k = 0; k < nt; ++k) e = std::max(e, std::abs(c.samples()[k] - std::sin(g.node(k))));
    return e;
  };
  const double e1 = err(101), e2 = err(201);
  EXPECT_LT(e1, 1e-3);
  EXPECT_NEAR(e1 / e2, 4.0, 0.2);
}
