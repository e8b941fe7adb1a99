#pragma once

#include "mixnewton/testbed.hpp"

#include <random>

namespace mnt {

using namespace mixnewton;

inline CVector random_point(std::mt19937_64& rng, Index n, double box = 2.0) {
  std::uniform_real_distribution<double> u(-box, box);
  CVector z(n);
  for (Index i = 0; i < n; ++i) z[i] = Complex(u(rng), u(rng));
  return z;
}

inline CVector real_point(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  CVector z(n);
  for (Index i = 0; i < n; ++i) z[i] = Complex(u(rng), 0.0);
  return z;
}

// g(z) = sum_k c_k z^k in one variable
inline FunctionalSystem::Residual monomial_residual(Complex c, int power, Index var = 0) {
  return {[=](const CVector& z) { return c * std::pow(z[var], power); },
          [=](const CVector& z) {
            CVector g = CVector::Zero(z.size());
            if (power >= 1) g[var] = c * double(power) * std::pow(z[var], power - 1);
            return g;
          },
          [=](const CVector& z) {
            CMatrix h = CMatrix::Zero(z.size(), z.size());
            if (power >= 2) h(var, var) = c * double(power * (power - 1)) * std::pow(z[var], power - 2);
            return h;
          }};
}

// g(z) = a^T z + b
inline FunctionalSystem::Residual affine_residual(const CVector& a, Complex b) {
  return {[=](const CVector& z) { return (a.transpose() * z).value() + b; },
          [=](const CVector&) { return a; },
          [=](const CVector& z) { return CMatrix::Zero(z.size(), z.size()).eval(); }};
}

inline std::vector<PolynomialExample> all_example_systems() {
  return {PolynomialExample(1, ResidualMode::single, 0.0), PolynomialExample(1, ResidualMode::terms, 0.0),
          PolynomialExample(2, ResidualMode::single, 0.0), PolynomialExample(2, ResidualMode::terms, 0.0),
          PolynomialExample(3, ResidualMode::single, 0.0),
          PolynomialExample(3, ResidualMode::single, kExample3Optimum)};
}

}  // namespace mnt
