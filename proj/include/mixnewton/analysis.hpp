#pragma once

// Local stability of the regularized iteration at critical points: the
// linearized map Y, its congruent/similar Hermitian forms M', Y', and
// critical point classification from the signature of M.

#include "mixnewton/solvers.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace mixnewton {

enum class Classification { minimum, saddle, degenerate, maximum };

inline std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::minimum: return "minimum";
    case Classification::saddle: return "saddle";
    case Classification::degenerate: return "degenerate";
    case Classification::maximum: return "maximum";
  }
  return "unknown";
}

class NotCriticalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kCriticalTolerance = 1e-8;
inline constexpr double kEigenRelTolerance = 1e-8;

struct Signature {
  int positive = 0;
  int negative = 0;
  int zero = 0;
  bool operator==(const Signature&) const = default;
};

inline Signature signature(const RVector& eig, double tol) {
  Signature s;
  for (Index i = 0; i < eig.size(); ++i) {
    if (eig(i) > tol) ++s.positive;
    else if (eig(i) < -tol) ++s.negative;
    else ++s.zero;
  }
  return s;
}

inline double eig_tolerance(const CMatrix& m) {
  return kEigenRelTolerance * std::max(1.0, m.norm());
}

struct Classified {
  CVector location;
  double objective = 0.0;
  Classification classification = Classification::degenerate;
  double grad_norm = 0.0;
  RVector m_spectrum;
};

template <ResidualModel S>
Classified classify(const S& sys, const CVector& z, double tol = kCriticalTolerance) {
  const WirtingerEval ev = evaluate(sys, z, true);
  const double gn = ev.grad_zbar.norm();
  if (!(gn < tol)) {
    throw NotCriticalError("gradient norm " + std::to_string(gn) + " exceeds tolerance");
  }
  const HermitianMatrix m = full_wirtinger_hessian(ev.B, *ev.A);
  Classified out;
  out.location = z;
  out.objective = ev.f;
  out.grad_norm = gn;
  out.m_spectrum = eigenvalues(m);
  const Signature sig = signature(out.m_spectrum, eig_tolerance(m.matrix()));
  if (sig.negative == 0 && sig.zero == 0) out.classification = Classification::minimum;
  else if (sig.positive > 0 && sig.negative > 0) out.classification = Classification::saddle;
  else if (sig.positive == 0 && sig.zero == 0) out.classification = Classification::maximum;
  else out.classification = Classification::degenerate;
  return out;
}

struct DynamicsReport {
  CMatrix Y;
  CMatrix Y_prime;
  CMatrix M;
  CMatrix M_prime;
  CMatrix Q;
  CMatrix S;
  CMatrix W;
  double spectral_radius = 0.0;
  double M_min_eig = 0.0;
  bool M_prime_spectrum_in_0_2 = false;
  bool stable = false;
  // consistency of the transforms
  double similarity_gap = 0.0;   // max sorted |eig(Y) - eig(Y')| / max(1, rho(Y))
  double identity_gap = 0.0;     // max |M' - (I - Y')|
  bool congruent_signature = false;
};

namespace detail {

inline std::vector<Complex> sorted_eigs(const CMatrix& m) {
  Eigen::ComplexEigenSolver<CMatrix> es(m, false);
  if (es.info() != Eigen::Success) throw NumericError("eigensolver failed");
  std::vector<Complex> v(es.eigenvalues().data(), es.eigenvalues().data() + m.rows());
  std::sort(v.begin(), v.end(), [](Complex a, Complex b) {
    const double tol = 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
    if (std::abs(a.real() - b.real()) > tol) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return v;
}

inline CMatrix blocks(const CMatrix& a, const CMatrix& b, const CMatrix& c, const CMatrix& d) {
  const Index n = a.rows();
  CMatrix out(2 * n, 2 * n);
  out << a, b, c, d;
  return out;
}

}  // namespace detail

inline DynamicsReport linearized_dynamics(const HermitianMatrix& B, const CMatrix& A,
                                         const HermitianMatrix& P) {
  const Index n = B.size();
  if (A.rows() != n || A.cols() != n || P.size() != n) {
    throw std::invalid_argument("block sizes disagree");
  }
  const HermitianMatrix bp = B + P;
  Eigen::LLT<CMatrix> llt(bp.matrix());
  if (llt.info() != Eigen::Success || min_eigenvalue(bp) <= kPivotTolerance * std::max(1.0, bp.matrix().norm())) {
    throw SingularMatrixError("B + P is not positive definite");
  }
  const CMatrix I = CMatrix::Identity(n, n);
  const CMatrix bpinv_b = llt.solve(B.matrix());
  const CMatrix bpinv_a = llt.solve(A);

  DynamicsReport r;
  r.Y = detail::blocks(I - bpinv_b, -bpinv_a, -bpinv_a.conjugate(), I - bpinv_b.conjugate());
  r.M = full_wirtinger_hessian(B, A).matrix();

  const HermitianMatrix w = hermitian_sqrt(bp);
  r.W = w.matrix();
  const CMatrix winv = r.W.inverse();
  r.Q = HermitianMatrix(winv * P.matrix() * winv).matrix();
  r.S = winv * A * winv.conjugate();
  r.M_prime = detail::blocks(I - r.Q.conjugate(), r.S.conjugate(), r.S, I - r.Q);
  r.Y_prime = detail::blocks(r.Q.conjugate(), -r.S.conjugate(), -r.S, r.Q);

  const std::vector<Complex> ey = detail::sorted_eigs(r.Y);
  double rho = 0.0;
  for (Complex e : ey) rho = std::max(rho, std::abs(e));
  r.spectral_radius = rho;
  r.stable = rho < 1.0;

  const HermitianMatrix m(r.M);
  const HermitianMatrix mp(r.M_prime);
  const RVector em = eigenvalues(m);
  const RVector emp = eigenvalues(mp);
  r.M_min_eig = em.minCoeff();
  r.M_prime_spectrum_in_0_2 = emp.minCoeff() > 0.0 && emp.maxCoeff() < 2.0;
  r.congruent_signature = signature(em, eig_tolerance(r.M)) == signature(emp, eig_tolerance(r.M_prime));

  const std::vector<Complex> eyp = detail::sorted_eigs(r.Y_prime);
  for (std::size_t i = 0; i < ey.size(); ++i) {
    r.similarity_gap = std::max(r.similarity_gap, std::abs(ey[i] - eyp[i]));
  }
  r.similarity_gap /= std::max(1.0, rho);
  r.identity_gap = (r.M_prime - (CMatrix::Identity(2 * n, 2 * n) - r.Y_prime)).cwiseAbs().maxCoeff();
  return r;
}

template <ResidualModel S>
DynamicsReport linearized_dynamics(const S& sys, const CVector& z, const HermitianMatrix& P) {
  const WirtingerEval ev = evaluate(sys, z, true);
  return linearized_dynamics(ev.B, *ev.A, P);
}

/// rho(Y) < 1 iff M > 0, and M > 0 implies spectrum(M') in (0, 2).
inline bool stability_theorem_holds(const DynamicsReport& r) {
  const bool m_pd = r.M_min_eig > eig_tolerance(r.M);
  const bool m_psd_singular = !m_pd && r.M_min_eig > -eig_tolerance(r.M);
  // on the boundary of the cone the radius sits at 1 up to roundoff
  if (m_psd_singular && std::abs(r.spectral_radius - 1.0) < 1e-6) return true;
  if (r.stable != m_pd) return false;
  if (m_pd && !r.M_prime_spectrum_in_0_2) return false;
  return true;
}

template <ResidualModel S>
bool verify_stability_theorem(const S& sys, const CVector& z, const HermitianMatrix& P) {
  return stability_theorem_holds(linearized_dynamics(sys, z, P));
}

/// Random Hermitian positive definite matrix with eigenvalues in [lo, hi].
template <class Rng>
HermitianMatrix random_hpd(Index n, Rng& rng, double lo = 1e-6, double hi = 1.0) {
  std::normal_distribution<double> nd;
  CMatrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = Complex(nd(rng), nd(rng));
  Eigen::HouseholderQR<CMatrix> qr(g);
  const CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  RVector d(n);
  for (Index i = 0; i < n; ++i) d(i) = std::exp(u(rng));
  return HermitianMatrix(q * d.cast<Complex>().asDiagonal() * q.adjoint());
}

/// Median of the fitted geometric decay rate of ||z_k - z*|| for RMNM with
/// fixed P, started at z* + 1e-4 * random unit direction.
template <ResidualModel S>
double empirical_rate(const S& sys, const CVector& zstar, const HermitianMatrix& P, int trials,
                      std::uint64_t seed = 1, double perturbation = 1e-4) {
  if (trials <= 0) throw std::invalid_argument("trials must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const Index n = zstar.size();
  constexpr int kFirst = 5, kLast = 20;
  std::vector<double> rates;
  for (int t = 0; t < trials; ++t) {
    CVector d(n);
    for (Index i = 0; i < n; ++i) d(i) = Complex(nd(rng), nd(rng));
    CVector z = zstar + perturbation * d / d.norm();
    std::vector<double> logs;
    double rate = 0.0;
    bool exact = false;
    for (int k = 0; k <= kLast; ++k) {
      const double e = (z - zstar).norm();
      if (e <= 1e-300 || e < 1e-15 * std::max(1.0, zstar.norm())) {
        // hit the point up to roundoff
        exact = true;
        break;
      }
      if (k >= kFirst) logs.push_back(std::log(e));
      z = rmnm_fixed_step(sys, z, P);
    }
    if (!exact && logs.size() >= 2) {
      // least-squares slope of log error against k
      const double m = static_cast<double>(logs.size());
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < logs.size(); ++i) {
        const double x = static_cast<double>(i);
        sx += x; sy += logs[i]; sxx += x * x; sxy += x * logs[i];
      }
      rate = std::exp((m * sxy - sx * sy) / (m * sxx - sx * sx));
    }
    rates.push_back(rate);
  }
  std::sort(rates.begin(), rates.end());
  const std::size_t h = rates.size() / 2;
  return rates.size() % 2 ? rates[h] : 0.5 * (rates[h - 1] + rates[h]);
}

}  // namespace mixnewton
