#pragma once

// Wirtinger-calculus assembly for f(z) = sum_j |g_j(z)|^2 with holomorphic
// residuals g_j. Only g_j, g_j' and weighted sums of g_j'' are needed from a
// residual model.

#include "mixnewton/types.hpp"

#include <concepts>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace mixnewton {

/// Residual values and Jacobian at a point. Row j of `jacobian` is g_j'(z)^T.
struct ResidualJet {
  CVector values;
  CMatrix jacobian;
};

// clang-format off
template <class S>
concept ResidualModel = requires(const S& s, const CVector& z, const CVector& w) {
  { s.dimension() } -> std::convertible_to<Index>;
  { s.residual_count() } -> std::convertible_to<Index>;
  { s.values(z) } -> std::convertible_to<CVector>;
  { s.jet(z) } -> std::convertible_to<ResidualJet>;
  // sum_j w_j g_j''(z), an n x n complex symmetric matrix
  { s.weighted_hessian(z, w) } -> std::convertible_to<CMatrix>;
};
// clang-format on

namespace detail {

template <ResidualModel S>
void check_dimension(const S& sys, const CVector& z) {
  if (z.size() != static_cast<Index>(sys.dimension())) {
    throw std::invalid_argument("point dimension does not match residual system");
  }
}

inline void check_values(const CVector& values) {
  for (Index j = 0; j < values.size(); ++j) {
    if (!std::isfinite(values[j].real()) || !std::isfinite(values[j].imag())) {
      throw EvaluationError("non-finite residual value at index " + std::to_string(j), j);
    }
  }
}

inline void check_jacobian(const CMatrix& jac) {
  for (Index j = 0; j < jac.rows(); ++j) {
    if (!all_finite(CVector(jac.row(j).transpose()))) {
      throw EvaluationError("non-finite residual derivative at index " + std::to_string(j), j);
    }
  }
}

}  // namespace detail

template <ResidualModel S>
ResidualJet checked_jet(const S& sys, const CVector& z) {
  detail::check_dimension(sys, z);
  ResidualJet jet = sys.jet(z);
  detail::check_values(jet.values);
  detail::check_jacobian(jet.jacobian);
  return jet;
}

template <ResidualModel S>
double eval_objective(const S& sys, const CVector& z) {
  detail::check_dimension(sys, z);
  const CVector values = sys.values(z);
  detail::check_values(values);
  return values.squaredNorm();
}

/// sum_j g_j conj(g_j') = J^H g
inline CVector wirtinger_gradient(const ResidualJet& jet) {
  return jet.jacobian.adjoint() * jet.values;
}

/// sum_j conj(g_j') g_j'^T = J^H J, assembled on the upper triangle.
inline HermitianMatrix mixed_hessian(const ResidualJet& jet) {
  const CMatrix& jac = jet.jacobian;
  const Index n = jac.cols();
  CMatrix upper = CMatrix::Zero(n, n);
  for (Index l = 0; l < n; ++l) {
    for (Index k = 0; k <= l; ++k) {
      upper(k, l) = jac.col(k).dot(jac.col(l));  // dot conjugates the left operand
    }
  }
  return HermitianMatrix(upper);
}

template <ResidualModel S>
CVector wirtinger_gradient(const S& sys, const CVector& z) {
  return wirtinger_gradient(checked_jet(sys, z));
}

template <ResidualModel S>
HermitianMatrix mixed_hessian(const S& sys, const CVector& z) {
  return mixed_hessian(checked_jet(sys, z));
}

/// A = sum_j g_j conj(g_j'') = conj(sum_j conj(g_j) g_j'').
template <ResidualModel S>
CMatrix a_block(const S& sys, const CVector& z, const CVector& values) {
  CMatrix w = sys.weighted_hessian(z, values.conjugate());
  if (!all_finite(w)) throw EvaluationError("non-finite residual second derivative");
  return symmetrized(w.conjugate());
}

template <ResidualModel S>
CMatrix a_block(const S& sys, const CVector& z) {
  detail::check_dimension(sys, z);
  const CVector values = sys.values(z);
  detail::check_values(values);
  return a_block(sys, z, values);
}

struct WirtingerEval {
  double f = 0.0;
  CVector grad_zbar;
  HermitianMatrix B;
  std::optional<CMatrix> A;
};

template <ResidualModel S>
WirtingerEval evaluate(const S& sys, const CVector& z, bool with_a_block) {
  const ResidualJet jet = checked_jet(sys, z);
  WirtingerEval out;
  out.f = jet.values.squaredNorm();
  out.grad_zbar = wirtinger_gradient(jet);
  out.B = mixed_hessian(jet);
  if (with_a_block) out.A = a_block(sys, z, jet.values);
  return out;
}

/// M = [[conj(B), conj(A)], [A, B]], the Hessian in (z, conj z) coordinates.
inline HermitianMatrix full_wirtinger_hessian(const HermitianMatrix& B, const CMatrix& A) {
  const Index n = B.size();
  CMatrix m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = B.matrix().conjugate();
  m.topRightCorner(n, n) = A.conjugate();
  m.bottomLeftCorner(n, n) = A;
  m.bottomRightCorner(n, n) = B.matrix();
  return HermitianMatrix(m);
}

template <ResidualModel S>
HermitianMatrix full_wirtinger_hessian(const S& sys, const CVector& z) {
  const WirtingerEval e = evaluate(sys, z, true);
  return full_wirtinger_hessian(e.B, *e.A);
}

/// Gradient and Hessian of f in real coordinates r = (Re z, Im z), computed
/// straight from the chain rule on |g_j|^2 using the Cauchy-Riemann relations
/// d/dx g = g', d/dy g = i g'. Does not go through the Wirtinger blocks.
struct RealCoordinateDerivatives {
  RVector grad;     // (df/dx, df/dy)
  RMatrix hessian;  // [[Hxx, Hxy], [Hyx, Hyy]], Hab(k, l) = d^2 f / da_k db_l

  Index n() const { return grad.size() / 2; }
  RMatrix hxx() const { return hessian.topLeftCorner(n(), n()); }
  RMatrix hxy() const { return hessian.topRightCorner(n(), n()); }
  RMatrix hyx() const { return hessian.bottomLeftCorner(n(), n()); }
  RMatrix hyy() const { return hessian.bottomRightCorner(n(), n()); }
};

template <ResidualModel S>
RealCoordinateDerivatives real_coordinate_derivatives(const S& sys, const CVector& z) {
  const ResidualJet jet = checked_jet(sys, z);
  const Index n = z.size();
  const CMatrix& jac = jet.jacobian;
  const CVector gbar_jac = jac.transpose() * jet.values.conjugate();  // sum_j conj(g_j) g_j'
  const CMatrix w = sys.weighted_hessian(z, jet.values.conjugate());  // sum_j conj(g_j) g_j''
  const CMatrix outer = jac.transpose() * jac.conjugate();  // (k, l) = sum_j g'_jk conj(g'_jl)
  const Complex i(0.0, 1.0);

  RealCoordinateDerivatives out;
  out.grad.resize(2 * n);
  out.hessian.resize(2 * n, 2 * n);
  for (Index k = 0; k < n; ++k) {
    out.grad[k] = 2.0 * gbar_jac[k].real();
    out.grad[n + k] = 2.0 * (i * gbar_jac[k]).real();
  }
  for (Index k = 0; k < n; ++k) {
    for (Index l = 0; l < n; ++l) {
      // d^2|g|^2 / da db = 2 Re(conj(g) g_ab + g_a conj(g_b))
      out.hessian(k, l) = 2.0 * (w(k, l) + outer(k, l)).real();
      out.hessian(k, n + l) = 2.0 * (i * w(k, l) - i * outer(k, l)).real();
      out.hessian(n + k, l) = 2.0 * (i * w(k, l) + i * outer(k, l)).real();
      out.hessian(n + k, n + l) = 2.0 * (-w(k, l) + outer(k, l)).real();
    }
  }
  return out;
}

/// Residual system assembled from per-residual callables. Convenient for
/// tests and small hand-written problems.
class FunctionalSystem {
 public:
  struct Residual {
    std::function<Complex(const CVector&)> value;
    std::function<CVector(const CVector&)> gradient;
    std::function<CMatrix(const CVector&)> hessian;
  };

  FunctionalSystem(Index dimension, std::vector<Residual> residuals)
      : dimension_(dimension), residuals_(std::move(residuals)) {
    if (dimension_ < 1) throw std::invalid_argument("dimension must be positive");
  }

  Index dimension() const { return dimension_; }
  Index residual_count() const { return static_cast<Index>(residuals_.size()); }

  CVector values(const CVector& z) const {
    CVector v(residual_count());
    for (Index j = 0; j < residual_count(); ++j) v[j] = residuals_[j].value(z);
    return v;
  }

  ResidualJet jet(const CVector& z) const {
    ResidualJet out{values(z), CMatrix(residual_count(), dimension_)};
    for (Index j = 0; j < residual_count(); ++j) {
      out.jacobian.row(j) = residuals_[j].gradient(z).transpose();
    }
    return out;
  }

  CMatrix weighted_hessian(const CVector& z, const CVector& w) const {
    CMatrix out = CMatrix::Zero(dimension_, dimension_);
    for (Index j = 0; j < residual_count(); ++j) {
      if (w[j] != Complex(0.0)) out += w[j] * residuals_[j].hessian(z);
    }
    return out;
  }

 private:
  Index dimension_;
  std::vector<Residual> residuals_;
};

}  // namespace mixnewton
