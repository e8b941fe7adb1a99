#pragma once

// Complex-repulsive regularization: the 2n extra residuals gamma*exp(+-i z_l)
// whose squared moduli add 2 gamma^2 sum_l cosh(2 Im z_l) to the objective.

#include "mixnewton/wirtinger.hpp"

namespace mixnewton {

struct PenaltyParams {
  double gamma = 1e-3;

  void validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("penalty gamma must be positive");
  }
};

struct PenaltyTerms {
  double value = 0.0;
  CVector grad_zbar;   // 2 i gamma^2 sinh(2 Im z_l) e_l
  RVector hess_diag;   // 2 gamma^2 cosh(2 Im z_l), the mixed-Hessian diagonal
};

/// Overflowing cosh (|Im z| beyond ~355) yields non-finite terms; callers
/// treat that as divergence.
inline PenaltyTerms repulsive_penalty(const CVector& z, const PenaltyParams& params) {
  params.validate();
  const double c = 2.0 * params.gamma * params.gamma;
  PenaltyTerms out;
  out.grad_zbar.resize(z.size());
  out.hess_diag.resize(z.size());
  for (Index l = 0; l < z.size(); ++l) {
    const double t = 2.0 * z[l].imag();
    const double ch = c * std::cosh(t);
    out.value += ch;
    out.hess_diag[l] = ch;
    out.grad_zbar[l] = Complex(0.0, c * std::sinh(t));
  }
  return out;
}

/// Wraps a residual model and appends the 2n penalty residuals
/// gamma e^{i z_l} (l < n) and gamma e^{-i z_l} (l >= n).
template <ResidualModel S>
class RepulsivePenalized {
 public:
  RepulsivePenalized(const S& base, PenaltyParams params) : base_(base), params_(params) {
    params_.validate();
  }

  Index dimension() const { return base_.dimension(); }
  Index residual_count() const { return base_.residual_count() + 2 * dimension(); }
  const S& base() const { return base_; }
  const PenaltyParams& params() const { return params_; }

  CVector values(const CVector& z) const {
    const Index m = base_.residual_count(), n = dimension();
    CVector v(m + 2 * n);
    v.head(m) = base_.values(z);
    append_values(z, v);
    return v;
  }

  ResidualJet jet(const CVector& z) const {
    const Index m = base_.residual_count(), n = dimension();
    ResidualJet b = base_.jet(z);
    ResidualJet out{CVector(m + 2 * n), CMatrix::Zero(m + 2 * n, n)};
    out.values.head(m) = b.values;
    out.jacobian.topRows(m) = b.jacobian;
    append_values(z, out.values);
    const Complex i(0.0, 1.0);
    for (Index l = 0; l < n; ++l) {
      out.jacobian(m + l, l) = i * out.values[m + l];
      out.jacobian(m + n + l, l) = -i * out.values[m + n + l];
    }
    return out;
  }

  CMatrix weighted_hessian(const CVector& z, const CVector& w) const {
    const Index m = base_.residual_count(), n = dimension();
    CMatrix out = base_.weighted_hessian(z, w.head(m));
    CVector v(m + 2 * n);
    append_values(z, v);
    // (gamma e^{+-i z})'' = -gamma e^{+-i z}
    for (Index l = 0; l < n; ++l) {
      out(l, l) -= w[m + l] * v[m + l] + w[m + n + l] * v[m + n + l];
    }
    return out;
  }

 private:
  void append_values(const CVector& z, CVector& v) const {
    const Index m = base_.residual_count(), n = dimension();
    const Complex i(0.0, 1.0);
    for (Index l = 0; l < n; ++l) {
      v[m + l] = params_.gamma * std::exp(i * z[l]);
      v[m + n + l] = params_.gamma * std::exp(-i * z[l]);
    }
  }

  S base_;
  PenaltyParams params_;
};

}  // namespace mixnewton
