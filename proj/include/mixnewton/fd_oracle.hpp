#pragma once

// Central-difference estimates of every Wirtinger block, taken in the real
// coordinates (Re z, Im z). First derivatives come from differences of f;
// second derivatives from differences of the analytic gradient, since second
// differences of f at step 1e-6 lose about eight digits to cancellation.

#include "mixnewton/wirtinger.hpp"

namespace mixnewton {

struct FdEstimate {
  CVector grad_zbar;
  CMatrix B;
  CMatrix A;
  RMatrix hxx, hxy, hyx, hyy;

  RMatrix real_hessian() const {
    const Index n = hxx.rows();
    RMatrix h(2 * n, 2 * n);
    h << hxx, hxy, hyx, hyy;
    return h;
  }
};

inline constexpr double kDefaultFdStep = 1e-6;

template <ResidualModel S>
FdEstimate fd_oracle(const S& sys, const CVector& z, double step = kDefaultFdStep) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const Index n = z.size();
  const Complex i(0.0, 1.0);
  FdEstimate out;

  out.grad_zbar.resize(n);
  for (Index k = 0; k < n; ++k) {
    CVector zp = z, zm = z;
    zp[k] += step;
    zm[k] -= step;
    const double dfdx = (eval_objective(sys, zp) - eval_objective(sys, zm)) / (2.0 * step);
    zp = z;
    zm = z;
    zp[k] += i * step;
    zm[k] -= i * step;
    const double dfdy = (eval_objective(sys, zp) - eval_objective(sys, zm)) / (2.0 * step);
    out.grad_zbar[k] = 0.5 * Complex(dfdx, dfdy);
  }

  // columns: derivative of the analytic grad_zbar along x_l and y_l
  CMatrix dgdx(n, n), dgdy(n, n);
  for (Index l = 0; l < n; ++l) {
    CVector zp = z, zm = z;
    zp[l] += step;
    zm[l] -= step;
    dgdx.col(l) = (wirtinger_gradient(sys, zp) - wirtinger_gradient(sys, zm)) / (2.0 * step);
    zp = z;
    zm = z;
    zp[l] += i * step;
    zm[l] -= i * step;
    dgdy.col(l) = (wirtinger_gradient(sys, zp) - wirtinger_gradient(sys, zm)) / (2.0 * step);
  }
  // d/dz = (d/dx - i d/dy)/2, d/dzbar = (d/dx + i d/dy)/2
  out.B = 0.5 * (dgdx - i * dgdy);
  out.A = 0.5 * (dgdx + i * dgdy);

  // df/dx_k = 2 Re(grad_zbar_k), df/dy_k = 2 Im(grad_zbar_k)
  out.hxx = 2.0 * dgdx.real();
  out.hxy = 2.0 * dgdy.real();
  out.hyx = 2.0 * dgdx.imag();
  out.hyy = 2.0 * dgdy.imag();
  return out;
}

/// Relative error ||a - b|| / max(1, ||b||), Frobenius norm.
template <class A, class B>
double relative_error(const A& a, const B& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace mixnewton
