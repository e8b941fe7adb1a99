#pragma once

// Mixed Newton iterations and their regularized, Levenberg-Marquardt and
// cubic variants, plus the ordinary Newton baseline on the real slice.

#include "mixnewton/numerics.hpp"
#include "mixnewton/penalty.hpp"
#include "mixnewton/wirtinger.hpp"

#include <Eigen/LU>

#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mixnewton {

enum class Method { mnm, rmnm_fixed, rmnm_repulsive, onm, lm_mnm, lm_nm, cnm, cmnm };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::mnm: return "mnm";
    case Method::rmnm_fixed: return "rmnm-fixed";
    case Method::rmnm_repulsive: return "rmnm";
    case Method::onm: return "onm";
    case Method::lm_mnm: return "lm-mnm";
    case Method::lm_nm: return "lm-nm";
    case Method::cnm: return "cnm";
    case Method::cmnm: return "cmnm";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::mnm, Method::rmnm_fixed, Method::rmnm_repulsive, Method::onm,
                   Method::lm_mnm, Method::lm_nm, Method::cnm, Method::cmnm}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

struct LmParams {
  double lambda0 = 0.01;
  double alpha = 10.0;
  double mu = 1.0;
  int max_inner = 100;
};

struct CubicParams {
  double lipschitz = 1.0;
  bool line_search = false;  // double L while f(z1) exceeds the cubic model bound
  int max_doublings = 50;
};

struct StopCriteria {
  double grad_tol = 1e-10;
  double step_tol = 1e-12;
  long max_iters = 1000;
  double divergence_bound = 1e8;
};

struct SolverConfig {
  Method method = Method::rmnm_repulsive;
  std::optional<HermitianMatrix> P;
  std::optional<PenaltyParams> penalty;
  LmParams lm;
  CubicParams cubic;
  StopCriteria stop;
  bool keep_history = true;  // false: only the first and last records are kept

  void validate() const {
    if (method == Method::rmnm_fixed) {
      if (!P) throw std::invalid_argument("rmnm-fixed requires a regularizing matrix P");
      Eigen::LLT<CMatrix> llt(P->matrix());
      if (llt.info() != Eigen::Success) throw std::invalid_argument("P must be positive definite");
    }
    if (method == Method::rmnm_repulsive) {
      if (!penalty) throw std::invalid_argument("rmnm requires penalty parameters");
      penalty->validate();
    }
    if (method == Method::lm_mnm || method == Method::lm_nm) {
      if (!(lm.lambda0 >= 0.0)) throw std::invalid_argument("lambda0 must be >= 0");
      if (!(lm.alpha > 1.0)) throw std::invalid_argument("alpha must be > 1");
      if (!(lm.mu > 0.0)) throw std::invalid_argument("mu must be > 0");
    }
    if (method == Method::cnm || method == Method::cmnm) {
      if (!(cubic.lipschitz > 0.0)) throw std::invalid_argument("Lipschitz constant must be > 0");
    }
    if (stop.max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  }
};

enum class Status { converged, max_iters, diverged, numeric_error };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::max_iters: return "max_iters";
    case Status::diverged: return "diverged";
    case Status::numeric_error: return "numeric_error";
  }
  return "unknown";
}

struct IterationRecord {
  long k = 0;
  CVector z;
  double f = 0.0;
  double grad_norm = 0.0;
  double step_norm = 0.0;
  double scalar = std::numeric_limits<double>::quiet_NaN();  // lambda (LM) or delta (cubic)
};

struct Trace {
  std::vector<IterationRecord> records;
  Status status = Status::max_iters;
  long iterations = 0;
  std::string message;

  const IterationRecord& last() const { return records.back(); }
};

// ---------------------------------------------------------------------------
// Hessian combinations

/// H_zbar z + (H_zz + H_zbar zbar)/2 = B + Re(A): the complex representation
/// of the full Newton model used by LM-NM and CNM.
inline HermitianMatrix effective_hessian(const HermitianMatrix& B, const CMatrix& A) {
  return HermitianMatrix(B.matrix() + 0.5 * (A + A.conjugate()));
}

// ---------------------------------------------------------------------------
// Single steps. Each returns the next iterate.

namespace detail {

inline CVector mnm_update(const CVector& z, const ResidualJet& jet) {
  return z - solve_stacked_least_squares(jet.jacobian, jet.values);
}

inline CVector rmnm_fixed_update(const CVector& z, const ResidualJet& jet,
                                 const CMatrix& p_factor_adjoint) {
  const Index m = jet.values.size(), n = z.size();
  CMatrix stacked(m + n, n);
  stacked << jet.jacobian, p_factor_adjoint;
  CVector rhs = CVector::Zero(m + n);
  rhs.head(m) = jet.values;
  return z - solve_stacked_least_squares(stacked, rhs);
}

inline CVector rmnm_repulsive_update(const CVector& z, const ResidualJet& jet,
                                     const PenaltyTerms& pen) {
  const Index m = jet.values.size(), n = z.size();
  if (!pen.hess_diag.allFinite()) throw EvaluationError("penalty overflow");
  CMatrix stacked = CMatrix::Zero(m + n, n);
  CVector rhs(m + n);
  stacked.topRows(m) = jet.jacobian;
  rhs.head(m) = jet.values;
  for (Index l = 0; l < n; ++l) {
    const double root = std::sqrt(pen.hess_diag[l]);
    stacked(m + l, l) = root;
    rhs[m + l] = pen.grad_zbar[l] / root;
  }
  return z - solve_stacked_least_squares(stacked, rhs);
}

inline Eigen::FullPivLU<RMatrix> checked_lu(const RMatrix& m) {
  Eigen::FullPivLU<RMatrix> lu(m);
  if (lu.rank() < m.rows()) throw SingularMatrixError("Newton matrix is singular");
  return lu;
}

}  // namespace detail

/// z - B(z)^{-1} grad_zbar(z). Rank-deficient B throws SingularMatrixError.
template <ResidualModel S>
CVector mnm_step(const S& sys, const CVector& z) {
  return detail::mnm_update(z, checked_jet(sys, z));
}

/// z - (B(z) + P)^{-1} grad_zbar(z).
template <ResidualModel S>
CVector rmnm_fixed_step(const S& sys, const CVector& z, const HermitianMatrix& P) {
  Eigen::LLT<CMatrix> llt(P.matrix());
  if (llt.info() != Eigen::Success) throw std::invalid_argument("P must be positive definite");
  return detail::rmnm_fixed_update(z, checked_jet(sys, z), llt.matrixU());
}

/// Mixed Newton step on f + 2 gamma^2 sum cosh(2 Im z_l): the mixed Hessian
/// gains diag(2 gamma^2 cosh(2 Im z_l)) and the gradient 2 i gamma^2 sinh(2 Im z_l).
/// For m residuals the rank-one term of the single-residual formula is the
/// full B(z).
template <ResidualModel S>
CVector rmnm_repulsive_step(const S& sys, const CVector& z, const PenaltyParams& params) {
  return detail::rmnm_repulsive_update(z, checked_jet(sys, z), repulsive_penalty(z, params));
}

/// Closed form of the repulsive step on the real slice for a single
/// real-coefficient residual: x - g0 g0' / (2 gamma^2 + ||g0'||^2).
template <ResidualModel S>
CVector rmnm_repulsive_real_closed_form(const S& sys, const CVector& x,
                                        const PenaltyParams& params) {
  if (sys.residual_count() != 1) throw std::invalid_argument("closed form needs one residual");
  const ResidualJet jet = checked_jet(sys, x);
  const CVector grad = jet.jacobian.row(0).transpose();
  const double denom = 2.0 * params.gamma * params.gamma + grad.squaredNorm();
  return x - jet.values[0] * grad / denom;
}

namespace detail {

template <ResidualModel S>
CVector onm_update(const S& sys, const CVector& x, const ResidualJet& jet) {
  // Newton on sum_j g_j(x)^2 over R^n: (sum g_j g_j'' + J^T J) s = J^T g
  const RMatrix jac = jet.jacobian.real();
  const RVector vals = jet.values.real();
  const RMatrix w = sys.weighted_hessian(x, jet.values).real();
  const RMatrix newton = w + jac.transpose() * jac;
  const RVector rhs = jac.transpose() * vals;
  const RVector s = checked_lu(newton).solve(rhs);
  if (!s.allFinite()) throw SingularMatrixError("Newton step is not finite");
  return x - s.cast<Complex>();
}

inline void require_real(const CVector& x) {
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i].imag() != 0.0) throw std::invalid_argument("ordinary Newton needs a real point");
  }
}

}  // namespace detail

/// Ordinary Newton method on the real slice,
/// x - g0 (g0 g0'' + g0' g0'^T)^{-1} g0' in the single-residual case.
/// The system must have real coefficients.
template <ResidualModel S>
CVector onm_step(const S& sys, const CVector& x) {
  detail::require_real(x);
  return detail::onm_update(sys, x, checked_jet(sys, x));
}

struct CubicStep {
  CVector z;
  double delta = 0.0;
  double lipschitz = 0.0;
};

/// Cubic Newton step with the full complex Hessian combination B + Re(A)
/// and shift delta L / 4.
template <ResidualModel S>
CubicStep cnm_step(const S& sys, const CVector& z, double lipschitz) {
  const WirtingerEval e = evaluate(sys, z, true);
  const DeltaSolution d =
      solve_delta(effective_hessian(e.B, *e.A), e.grad_zbar, lipschitz, DeltaShift::quarter);
  return {z - d.step, d.delta, lipschitz};
}

/// The same cubic Newton step assembled from real-coordinate blocks only:
/// z - 2 (2 Hxx + delta L I + i (Hyx - Hxy))^{-1} (g_x + i g_y). Hyy is not used.
template <ResidualModel S>
CubicStep cnm_step_real_blocks(const S& sys, const CVector& z, double lipschitz) {
  const RealCoordinateDerivatives r = real_coordinate_derivatives(sys, z);
  const Index n = z.size();
  const Complex i(0.0, 1.0);
  const CMatrix core = 2.0 * r.hxx().cast<Complex>() + i * (r.hyx() - r.hxy()).cast<Complex>();
  const CVector g = r.grad.head(n).cast<Complex>() + i * r.grad.tail(n).cast<Complex>();
  // delta solves the same equation with H = core / 4 and grad_zbar = g / 2
  const DeltaSolution d =
      solve_delta(HermitianMatrix(0.25 * core), 0.5 * g, lipschitz, DeltaShift::quarter);
  CMatrix system = core;
  system.diagonal().array() += d.delta * lipschitz;
  return {z - 2.0 * system.partialPivLu().solve(g), d.delta, lipschitz};
}

/// Cubic mixed Newton step: only B, with shift L (1 + delta / 4).
template <ResidualModel S>
CubicStep cmnm_step(const S& sys, const CVector& z, double lipschitz) {
  const ResidualJet jet = checked_jet(sys, z);
  const DeltaSolution d = solve_delta(mixed_hessian(jet), wirtinger_gradient(jet), lipschitz,
                                      DeltaShift::one_plus_quarter);
  return {z - d.step, d.delta, lipschitz};
}

/// Upper model value the cubic step is validated against.
inline double cubic_model_bound(Method method, double f, const CVector& grad,
                                const HermitianMatrix& h, const CVector& dz, double delta,
                                double lipschitz) {
  const double linear = 2.0 * grad.dot(dz).real();
  const double quad = dz.dot(h.matrix() * dz).real();
  if (method == Method::cnm) return f + linear + quad + lipschitz / 6.0 * delta * delta * delta;
  return f + linear + quad + lipschitz * delta * delta * (1.0 + delta / 6.0);
}

// ---------------------------------------------------------------------------
// Iteration drivers

namespace detail {

class TraceBuilder {
 public:
  explicit TraceBuilder(bool keep_history) : keep_history_(keep_history) {}

  void push(IterationRecord rec) {
    if (keep_history_ || trace_.records.size() < 2) {
      trace_.records.push_back(std::move(rec));
    } else {
      trace_.records.back() = std::move(rec);
    }
  }

  Trace finish(Status status, long iterations, std::string message = {}) {
    trace_.status = status;
    trace_.iterations = iterations;
    trace_.message = std::move(message);
    return std::move(trace_);
  }

 private:
  bool keep_history_;
  Trace trace_;
};

struct PointState {
  ResidualJet jet;
  double f = 0.0;
  CVector grad;
};

template <ResidualModel S>
PointState point_state(const S& sys, const CVector& z, const SolverConfig& cfg) {
  PointState st{checked_jet(sys, z), 0.0, CVector()};
  st.f = st.jet.values.squaredNorm();
  st.grad = wirtinger_gradient(st.jet);
  if (cfg.method == Method::rmnm_repulsive) {
    const PenaltyTerms pen = repulsive_penalty(z, *cfg.penalty);
    st.f += pen.value;
    st.grad += pen.grad_zbar;
  }
  if (!std::isfinite(st.f) || !all_finite(st.grad)) throw EvaluationError("objective overflow");
  return st;
}

template <ResidualModel S>
Trace lm_adaptive_run(const S& sys, const CVector& z0, const SolverConfig& cfg) {
  const StopCriteria& stop = cfg.stop;
  const LmParams& lm = cfg.lm;
  TraceBuilder tb(cfg.keep_history);
  CVector z = z0;
  double lambda = lm.lambda0;
  double f = 0.0;
  try {
    f = eval_objective(sys, z);
  } catch (const EvaluationError& e) {
    return tb.finish(Status::numeric_error, 0, e.what());
  }

  for (long k = 0;; ++k) {
    WirtingerEval e;
    try {
      e = evaluate(sys, z, cfg.method == Method::lm_nm);
    } catch (const EvaluationError& err) {
      return tb.finish(Status::numeric_error, k, err.what());
    }
    const HermitianMatrix h = cfg.method == Method::lm_nm ? effective_hessian(e.B, *e.A) : e.B;
    const double gnorm = e.grad_zbar.norm();
    if (k == 0) tb.push({0, z, f, gnorm, 0.0, lambda});
    if (gnorm < stop.grad_tol) return tb.finish(Status::converged, k);
    if (k == stop.max_iters) return tb.finish(Status::max_iters, k);

    const double scale = inf_norm_vec(h.matrix());
    auto attempt = [&](double lam, CVector& z1) -> double {
      try {
        z1 = z - lm.mu * solve_hpd(h.shifted(lam * scale), e.grad_zbar);
        const double f1 = eval_objective(sys, z1);
        return std::isfinite(f1) ? f1 : std::numeric_limits<double>::infinity();
      } catch (const SingularMatrixError&) {
        return std::numeric_limits<double>::infinity();
      } catch (const EvaluationError&) {
        return std::numeric_limits<double>::infinity();
      }
    };

    CVector z1;
    double used_lambda = lambda;
    double f1 = attempt(lambda, z1);
    if (f1 < f) {
      lambda /= lm.alpha;
    } else {
      int inner = 0;
      while (!(f1 < f)) {
        if (++inner > lm.max_inner) {
          return tb.finish(Status::numeric_error, k, "LM regularization loop exhausted");
        }
        // a zero lambda cannot grow geometrically; restart it from a tiny value
        lambda = lambda > 0.0 ? lambda * lm.alpha : 1e-12;
        used_lambda = lambda;
        f1 = attempt(lambda, z1);
        // the damped step shrank to roundoff without a decrease: f is at its
        // floating-point floor around z
        if (!(f1 < f) && z1.size() == z.size() &&
            (z1 - z).norm() <= std::max(stop.step_tol, 1e-15 * std::max(1.0, z.norm()))) {
          return tb.finish(Status::converged, k, "no representable decrease");
        }
      }
    }
    const double step_norm = (z1 - z).norm();
    z = std::move(z1);
    f = f1;
    if (z.norm() > stop.divergence_bound) return tb.finish(Status::diverged, k + 1);
    WirtingerEval next;
    try {
      next = evaluate(sys, z, false);
    } catch (const EvaluationError& err) {
      return tb.finish(Status::numeric_error, k + 1, err.what());
    }
    tb.push({k + 1, z, f, next.grad_zbar.norm(), step_norm, used_lambda});
    if (step_norm < stop.step_tol) return tb.finish(Status::converged, k + 1);
  }
}

}  // namespace detail

/// Levenberg-Marquardt adaptive regularization control around the mixed
/// Hessian (lm_mnm) or the full-Newton combination B + Re(A) (lm_nm).
/// Accepted iterations strictly decrease f.
template <ResidualModel S>
Trace lm_adaptive_run(const S& sys, const CVector& z0, const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.method != Method::lm_mnm && cfg.method != Method::lm_nm) {
    throw std::invalid_argument("lm_adaptive_run needs lm-mnm or lm-nm");
  }
  return detail::lm_adaptive_run(sys, z0, cfg);
}

/// Iterates the configured method from z0 until the gradient or step falls
/// below tolerance, the iteration cap is hit, or the iterate leaves the
/// divergence ball. Deterministic in (sys, z0, cfg).
template <ResidualModel S>
Trace run(const S& sys, const CVector& z0, const SolverConfig& cfg) {
  cfg.validate();
  detail::check_dimension(sys, z0);
  if (cfg.method == Method::lm_mnm || cfg.method == Method::lm_nm) {
    return detail::lm_adaptive_run(sys, z0, cfg);
  }
  if (cfg.method == Method::onm) detail::require_real(z0);

  const StopCriteria& stop = cfg.stop;
  detail::TraceBuilder tb(cfg.keep_history);
  CMatrix p_factor;
  if (cfg.method == Method::rmnm_fixed) p_factor = Eigen::LLT<CMatrix>(cfg.P->matrix()).matrixU();

  CVector z = z0;
  detail::PointState st;
  try {
    st = detail::point_state(sys, z, cfg);
  } catch (const EvaluationError& e) {
    return tb.finish(Status::diverged, 0, e.what());
  }
  double grad_norm = st.grad.norm();
  tb.push({0, z, st.f, grad_norm, 0.0});

  for (long k = 0;; ++k) {
    if (grad_norm < stop.grad_tol) return tb.finish(Status::converged, k);
    if (k == stop.max_iters) return tb.finish(Status::max_iters, k);

    CVector z1;
    double scalar = std::numeric_limits<double>::quiet_NaN();
    try {
      switch (cfg.method) {
        case Method::mnm: z1 = detail::mnm_update(z, st.jet); break;
        case Method::rmnm_fixed: z1 = detail::rmnm_fixed_update(z, st.jet, p_factor); break;
        case Method::rmnm_repulsive:
          z1 = detail::rmnm_repulsive_update(z, st.jet, repulsive_penalty(z, *cfg.penalty));
          break;
        case Method::onm: z1 = detail::onm_update(sys, z, st.jet); break;
        case Method::cnm:
        case Method::cmnm: {
          double lip = cfg.cubic.lipschitz;
          for (int d = 0;; ++d) {
            const CubicStep cs = cfg.method == Method::cnm ? cnm_step(sys, z, lip)
                                                           : cmnm_step(sys, z, lip);
            z1 = cs.z;
            scalar = cs.delta;
            if (!cfg.cubic.line_search || d >= cfg.cubic.max_doublings) break;
            HermitianMatrix h = mixed_hessian(st.jet);
            if (cfg.method == Method::cnm) h = effective_hessian(h, a_block(sys, z, st.jet.values));
            const double bound = cubic_model_bound(cfg.method, st.f, st.grad, h, z1 - z,
                                                   cs.delta, lip);
            double f1 = std::numeric_limits<double>::infinity();
            try {
              f1 = eval_objective(sys, z1);
            } catch (const EvaluationError&) {
            }
            if (f1 <= bound) break;
            lip *= 2.0;
          }
          break;
        }
        default: break;
      }
    } catch (const SingularMatrixError& e) {
      // a singular Newton matrix leaves the real-slice baseline without a step
      const Status s = cfg.method == Method::onm ? Status::diverged : Status::numeric_error;
      return tb.finish(s, k, e.what());
    } catch (const NumericError& e) {
      return tb.finish(Status::numeric_error, k, e.what());
    } catch (const EvaluationError& e) {
      return tb.finish(Status::diverged, k, e.what());
    }

    if (!all_finite(z1) || z1.norm() > stop.divergence_bound) {
      return tb.finish(Status::diverged, k + 1);
    }
    const double step_norm = (z1 - z).norm();
    z = std::move(z1);
    try {
      st = detail::point_state(sys, z, cfg);
    } catch (const EvaluationError& e) {
      return tb.finish(Status::diverged, k + 1, e.what());
    }
    grad_norm = st.grad.norm();
    tb.push({k + 1, z, st.f, grad_norm, step_norm, scalar});
    if (step_norm < stop.step_tol) return tb.finish(Status::converged, k + 1);
  }
}

}  // namespace mixnewton
