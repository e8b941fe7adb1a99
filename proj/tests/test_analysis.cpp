#include "mixnewton/analysis.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace mnt;

namespace {

// Jacobian of z -> rmnm_fixed_step(z) in (z, zbar) coordinates by central
// differences along real and imaginary directions
template <class S>
CMatrix fd_step_jacobian(const S& sys, const CVector& z, const HermitianMatrix& P, double h = 1e-6) {
  const Index n = z.size();
  CMatrix y11(n, n), y12(n, n);
  for (Index k = 0; k < n; ++k) {
    CVector e = CVector::Zero(n);
    e[k] = h;
    const CVector dr = (rmnm_fixed_step(sys, z + e, P) - rmnm_fixed_step(sys, z - e, P)) / (2 * h);
    const CVector di = (rmnm_fixed_step(sys, z + Complex(0, 1) * e, P) -
                        rmnm_fixed_step(sys, z - Complex(0, 1) * e, P)) /
                       Complex(0, 2 * h);
    y11.col(k) = 0.5 * (dr + di);
    y12.col(k) = 0.5 * (dr - di);
  }
  CMatrix y(2 * n, 2 * n);
  y << y11, y12, y12.conjugate(), y11.conjugate();
  return y;
}

FunctionalSystem square_system() { return FunctionalSystem(1, {monomial_residual(1.0, 2)}); }

}  // namespace

TEST(Classify, Example1TermsOriginIsMinimum) {
  const Classified c = classify(example(1, ResidualMode::terms), make_point({0.0, 0.0}));
  EXPECT_EQ(c.classification, Classification::minimum);
  EXPECT_GT(c.m_spectrum.minCoeff(), 0.0);
}

TEST(Classify, Example2SaddleInBothForms) {
  for (const auto& ex : {example(2), example(2, ResidualMode::terms)}) {
    EXPECT_EQ(classify(ex, make_point({1.0, 1.0})).classification, Classification::saddle);
  }
}

TEST(Classify, SquareAtOriginIsDegenerate) {
  const Classified c = classify(square_system(), make_point({0.0}));
  EXPECT_EQ(c.classification, Classification::degenerate);
  EXPECT_EQ(c.m_spectrum.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Classify, SingleResidualCriticalPointsAreNeverStrictMinima) {
  // g0' = 0 at every critical point of F, leaving M = [[0, conj A], [A, 0]]
  for (int id : {1, 2, 3}) {
    const auto ex = example(id);
    for (const auto& cp : known_critical_points(ex)) {
      const Classified c = classify(ex, cp.location);
      EXPECT_NE(c.classification, Classification::minimum) << id << " " << cp.label;
      EXPECT_NEAR(c.m_spectrum.sum(), 0.0, 1e-10 * std::max(1.0, c.m_spectrum.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Classify, RejectsNonCriticalPoint) {
  EXPECT_THROW(classify(example(1), make_point({0.5, 0.5})), NotCriticalError);
}

TEST(Classify, NoMaximaAnywhere) {
  for (const auto& ex : all_example_systems()) {
    for (const auto& cp : known_critical_points(ex)) {
      EXPECT_NE(classify(ex, cp.location).classification, Classification::maximum);
    }
  }
}

TEST(Signature, Counts) {
  RVector e(4);
  e << -1.0, 0.0, 1e-12, 3.0;
  EXPECT_EQ(signature(e, 1e-9), (Signature{1, 1, 2}));
}

TEST(Dynamics, AffineWithTinyShiftHasVanishingY) {
  CVector a(2), b(2);
  a << 1.0, 2.0;
  b << Complex(0, 1), -1.0;
  FunctionalSystem sys(2, {affine_residual(a, 0.5), affine_residual(b, Complex(0.2, 0.1))});
  const DynamicsReport r = linearized_dynamics(sys, make_point({0.3, -0.7}), HermitianMatrix::identity(2, 1e-12));
  EXPECT_LT(r.Y.cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(r.stable);
  EXPECT_TRUE(stability_theorem_holds(r));
}

TEST(Dynamics, YMatchesFiniteDifferenceOfStepMap) {
  std::mt19937_64 rng(61);
  for (const auto& ex : all_example_systems()) {
    for (const auto& cp : known_critical_points(ex)) {
      const HermitianMatrix P = random_hpd(2, rng, 1e-2, 1.0);
      const DynamicsReport r = linearized_dynamics(ex, cp.location, P);
      const CMatrix fd = fd_step_jacobian(ex, cp.location, P);
      EXPECT_LT((r.Y - fd).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, r.Y.cwiseAbs().maxCoeff()))
          << ex.id() << " " << cp.label;
    }
  }
}

TEST(Dynamics, Example1MinimumContracts) {
  const DynamicsReport r =
      linearized_dynamics(example(1, ResidualMode::terms), make_point({0.0, 0.0}), HermitianMatrix::identity(2, 0.1));
  EXPECT_LT(r.spectral_radius, 1.0);
  EXPECT_GT(r.M_min_eig, 0.0);
  EXPECT_TRUE(r.M_prime_spectrum_in_0_2);
}

TEST(Dynamics, Example2SaddleExpands) {
  for (const auto& ex : {example(2), example(2, ResidualMode::terms)}) {
    const DynamicsReport r = linearized_dynamics(ex, make_point({1.0, 1.0}), HermitianMatrix::identity(2, 0.1));
    EXPECT_GT(r.spectral_radius, 1.0);
    EXPECT_FALSE(r.stable);
    EXPECT_TRUE(stability_theorem_holds(r));
  }
}

TEST(Dynamics, SingularShiftRejected) {
  EXPECT_THROW(linearized_dynamics(example(1), make_point({0.0, 0.0}), HermitianMatrix::identity(2, 0.0)),
               SingularMatrixError);
}

TEST(Dynamics, TheoremAndTransformsAtAllCriticalPoints) {
  std::mt19937_64 rng(67);
  int checked = 0;
  for (const auto& ex : all_example_systems()) {
    for (const auto& cp : known_critical_points(ex)) {
      for (int t = 0; t < 20; ++t) {
        const HermitianMatrix P = random_hpd(2, rng);
        const DynamicsReport r = linearized_dynamics(ex, cp.location, P);
        EXPECT_TRUE(stability_theorem_holds(r)) << ex.id() << " " << cp.label << " rho " << r.spectral_radius;
        EXPECT_TRUE(r.congruent_signature);
        EXPECT_LT(r.similarity_gap, 1e-7);
        EXPECT_LT(r.identity_gap, 1e-12);
        EXPECT_LT((r.Q - r.Q.adjoint()).norm(), 1e-12 * std::max(1.0, r.Q.norm()));
        EXPECT_LT((r.S - r.S.transpose()).norm(), 1e-10 * std::max(1.0, r.S.norm()));
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 20 * (3 + 3 + 3 + 3 + 4 + 4));
}

TEST(Dynamics, CongruenceOfMAndMPrime) {
  // with B + P = W^2, M' = D M D for D = diag(conj W^-1, W^-1)
  std::mt19937_64 rng(71);
  const auto ex = example(1, ResidualMode::terms);
  for (const auto& cp : known_critical_points(ex)) {
    const HermitianMatrix P = random_hpd(2, rng, 0.05, 1.0);
    const DynamicsReport r = linearized_dynamics(ex, cp.location, P);
    const CMatrix winv = r.W.inverse();
    CMatrix d = CMatrix::Zero(4, 4);
    d.topLeftCorner(2, 2) = winv.conjugate();
    d.bottomRightCorner(2, 2) = winv;
    EXPECT_LT((r.M_prime - d * r.M * d).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, r.M.norm()));
  }
}

TEST(EmpiricalRate, AffineIsExactAfterOneStep) {
  CVector a(1);
  a << Complex(1, 1);
  FunctionalSystem sys(1, {affine_residual(a, 0.0)});
  EXPECT_LT(empirical_rate(sys, make_point({0.0}), HermitianMatrix::identity(1, 1e-16), 5), 1e-6);
}

TEST(EmpiricalRate, MatchesSpectralRadiusAtMinimum) {
  const auto ex = example(1, ResidualMode::terms);
  const CVector zstar = make_point({0.0, 0.0});
  const HermitianMatrix P = HermitianMatrix::identity(2, 0.5);
  const double rho = linearized_dynamics(ex, zstar, P).spectral_radius;
  const double rate = empirical_rate(ex, zstar, P, 15, 3);
  EXPECT_LE(rate, rho + 0.05);
  EXPECT_GE(rate, rho - 0.05);
}

TEST(EmpiricalRate, RejectsZeroTrials) {
  EXPECT_THROW(empirical_rate(example(1), make_point({0.0, 0.0}), HermitianMatrix::identity(2), 0),
               std::invalid_argument);
}

TEST(RandomHpd, EigenvaluesInRange) {
  std::mt19937_64 rng(73);
  for (int t = 0; t < 20; ++t) {
    const RVector e = eigenvalues(random_hpd(3, rng, 1e-3, 2.0));
    EXPECT_GE(e.minCoeff(), 1e-3 * (1 - 1e-9));
    EXPECT_LE(e.maxCoeff(), 2.0 * (1 + 1e-9));
  }
}
