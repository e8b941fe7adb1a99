#pragma once

#include "mixnewton/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace mixnewton {

inline constexpr double kPivotTolerance = 1e-14;

/// Largest entry modulus, i.e. ||vec(H)||_inf.
inline double inf_norm_vec(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Cholesky solve of H x = b. Throws SingularMatrixError when a pivot falls
/// below 1e-14 * ||vec(H)||_inf.
inline CVector solve_hpd(const HermitianMatrix& h, const CVector& b) {
  if (b.size() != h.size()) throw std::invalid_argument("solve_hpd: size mismatch");
  Eigen::LLT<CMatrix> llt(h.matrix());
  if (llt.info() != Eigen::Success) throw SingularMatrixError("matrix is not positive definite");
  const double floor = kPivotTolerance * inf_norm_vec(h.matrix());
  const CMatrix& l = llt.matrixLLT();
  for (Index i = 0; i < l.rows(); ++i) {
    const double pivot = std::norm(l(i, i));
    if (!(pivot > floor)) throw SingularMatrixError("Cholesky pivot below tolerance");
  }
  return llt.solve(b);
}

/// Least-squares solve of min ||S x - r|| by Householder QR. This is the
/// normal-equation system (S^H S) x = S^H r without forming S^H S, so the
/// conditioning is that of S rather than its square. Throws when some
/// |R_ii| falls below 1e-14 * max |R_jj|.
inline CVector solve_stacked_least_squares(const CMatrix& stacked, const CVector& rhs) {
  if (stacked.rows() < stacked.cols()) throw SingularMatrixError("rank-deficient stacked system");
  Eigen::HouseholderQR<CMatrix> qr(stacked);
  const CMatrix& r = qr.matrixQR();
  const Index n = stacked.cols();
  double max_pivot = 0.0;
  for (Index i = 0; i < n; ++i) max_pivot = std::max(max_pivot, std::abs(r(i, i)));
  for (Index i = 0; i < n; ++i) {
    if (!(std::abs(r(i, i)) > kPivotTolerance * max_pivot)) {
      throw SingularMatrixError("stacked system is numerically rank deficient");
    }
  }
  return qr.solve(rhs);
}

inline double min_eigenvalue(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

inline RVector eigenvalues(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Principal square root of a Hermitian PSD matrix; eigenvalues below
/// 1e-14 * ||H|| are clamped to that floor.
inline HermitianMatrix hermitian_sqrt(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix());
  const double floor = kPivotTolerance * std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  RVector roots = es.eigenvalues().cwiseMax(floor).cwiseSqrt();
  return HermitianMatrix(es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().adjoint());
}

/// Which shift s(delta) the cubic step-length equation uses.
enum class DeltaShift {
  quarter,           // s = delta * L / 4           (full-Hessian cubic Newton)
  one_plus_quarter,  // s = L * (1 + delta / 4)     (mixed-Hessian cubic Newton)
};

inline double delta_shift(DeltaShift form, double lipschitz, double delta) {
  return form == DeltaShift::quarter ? delta * lipschitz / 4.0
                                     : lipschitz * (1.0 + delta / 4.0);
}

/// Smallest admissible delta for which H + s(delta) I stays PSD.
inline double delta_lower_bound(DeltaShift form, double lipschitz, double lambda_min) {
  return form == DeltaShift::quarter ? (4.0 / lipschitz) * std::max(-lambda_min, 0.0)
                                     : 4.0 * std::max(-lambda_min / lipschitz - 1.0, 0.0);
}

struct DeltaSolution {
  double delta = 0.0;
  CVector step;  // (H + s(delta) I)^{-1} g
  int bisections = 0;
};

/// Solves delta = ||(H + s(delta) I)^{-1} g|| for delta >= delta_min.
///
/// phi(delta) = ||(H + s I)^{-1} g|| - delta is strictly decreasing above
/// delta_min, so the root is bracketed by geometric expansion and refined by
/// bisection. Each trial value costs one Cholesky factorization; an
/// eigen-decomposition is only used for lambda_min.
inline DeltaSolution solve_delta(const HermitianMatrix& h, const CVector& g, double lipschitz,
                                 DeltaShift form) {
  if (!(lipschitz > 0.0)) throw std::invalid_argument("Lipschitz constant must be positive");
  if (!all_finite(g)) throw std::invalid_argument("gradient is not finite");
  const Index n = h.size();
  DeltaSolution out;
  if (g.norm() == 0.0) {
    out.step = CVector::Zero(n);
    return out;
  }

  const double delta_min = delta_lower_bound(form, lipschitz, min_eigenvalue(h));

  // (norm of the shifted solve, the solve); +inf when the shift is not PD
  auto trial = [&](double delta) -> std::pair<double, CVector> {
    Eigen::LLT<CMatrix> llt(h.shifted(delta_shift(form, lipschitz, delta)).matrix());
    if (llt.info() != Eigen::Success) {
      return {std::numeric_limits<double>::infinity(), CVector()};
    }
    CVector x = llt.solve(g);
    const double nx = x.norm();
    if (!std::isfinite(nx)) return {std::numeric_limits<double>::infinity(), CVector()};
    return {nx, std::move(x)};
  };

  double lo = delta_min;
  auto [lo_norm, lo_step] = trial(lo);
  if (lo_norm - lo <= 0.0) {
    // either an exact root at delta_min or g has no component along the
    // bottom eigenvector (the "hard case"); only the former is accepted
    if (std::abs(lo_norm - lo) <= 1e-10 * std::max(1.0, lo)) {
      out.delta = lo;
      out.step = std::move(lo_step);
      return out;
    }
    throw NumericError("cubic step-length equation has no root above the lower bound");
  }

  double hi = std::max(delta_min, 1e-12);
  double hi_norm = 0.0;
  CVector hi_step;
  for (int expand = 0;; ++expand) {
    hi *= 2.0;
    std::tie(hi_norm, hi_step) = trial(hi);
    if (hi_norm - hi < 0.0) break;
    lo = hi;
    if (expand > 2000) throw NumericError("failed to bracket cubic step length");
  }

  double delta = hi;
  CVector step = hi_step;
  double resid = std::abs(hi_norm - hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto [mid_norm, mid_step] = trial(mid);
    const double phi = mid_norm - mid;
    delta = mid;
    step = std::move(mid_step);
    resid = std::abs(phi);
    out.bisections = it + 1;
    if (resid <= 1e-13 * std::max(1.0, mid)) break;
    if (phi > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  if (!(resid < 1e-10 * std::max(1.0, delta))) {
    throw NumericError("cubic step-length bisection did not converge");
  }
  out.delta = delta;
  out.step = std::move(step);
  return out;
}

}  // namespace mixnewton
