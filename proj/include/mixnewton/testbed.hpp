#pragma once

// The three bivariate polynomial test problems, start grids, and the
// basin-of-attraction experiment.

#include "mixnewton/solvers.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

namespace mixnewton {

enum class CriticalKind { global_min, local_min, saddle };

inline std::string_view to_string(CriticalKind k) {
  switch (k) {
    case CriticalKind::global_min: return "global";
    case CriticalKind::local_min: return "local";
    case CriticalKind::saddle: return "saddle";
  }
  return "unknown";
}

struct CriticalPointSeed {
  std::string label;
  CriticalKind kind;
  CVector location;  // as quoted, rounded
  double value;      // polynomial value as quoted
};

/// How the polynomial F is written as sum_j |g_j|^2.
enum class ResidualMode {
  single,  // one residual g0 = F - shift, so f = |F - shift|^2
  terms,   // the squared terms of F as separate residuals, so f = F (Examples 1-2 only)
};

/// F(x) = (a1 x1 + a2 x2)^2 + x1^2 (1 - x1)^2 + x2^2 (c - x2)^2 for Examples 1-2,
/// F(x) = (x1 + 1)^4 + (x2 + 1)^4 + 4 x1 x2 for Example 3.
class PolynomialExample {
 public:
  PolynomialExample(int id, ResidualMode mode, double shift)
      : id_(id), mode_(mode), shift_(shift) {
    if (id < 1 || id > 3) throw std::invalid_argument("example id must be 1, 2 or 3");
    if (id == 3 && mode == ResidualMode::terms) {
      throw std::invalid_argument("example 3 is not a sum of squared polynomial terms");
    }
  }

  int id() const { return id_; }
  ResidualMode mode() const { return mode_; }
  double shift() const { return shift_; }

  Index dimension() const { return 2; }
  Index residual_count() const { return mode_ == ResidualMode::terms ? 3 : 1; }

  /// The real polynomial, continued holomorphically.
  Complex polynomial(const CVector& z) const {
    if (id_ == 3) return poly3(z).value;
    const Terms t = terms(z);
    return t.value[0] * t.value[0] + t.value[1] * t.value[1] + t.value[2] * t.value[2];
  }

  /// Gradient and Hessian of the continued polynomial.
  std::pair<CVector, CMatrix> polynomial_derivatives(const CVector& z) const {
    if (id_ == 3) {
      const Poly p = poly3(z);
      return {p.grad, p.hess};
    }
    const Poly p = from_terms(terms(z));
    return {p.grad, p.hess};
  }

  CVector values(const CVector& z) const {
    if (mode_ == ResidualMode::terms) {
      const Terms t = terms(z);
      CVector v(3);
      v << t.value[0], t.value[1], t.value[2];
      return v;
    }
    CVector v(1);
    v[0] = polynomial(z) - shift_;
    return v;
  }

  ResidualJet jet(const CVector& z) const {
    if (mode_ == ResidualMode::terms) {
      const Terms t = terms(z);
      ResidualJet out{CVector(3), CMatrix(3, 2)};
      for (int j = 0; j < 3; ++j) {
        out.values[j] = t.value[j];
        out.jacobian.row(j) = t.grad[j].transpose();
      }
      return out;
    }
    const Poly p = id_ == 3 ? poly3(z) : from_terms(terms(z));
    ResidualJet out{CVector(1), CMatrix(1, 2)};
    out.values[0] = p.value - shift_;
    out.jacobian.row(0) = p.grad.transpose();
    return out;
  }

  CMatrix weighted_hessian(const CVector& z, const CVector& w) const {
    if (mode_ == ResidualMode::terms) {
      const Terms t = terms(z);
      CMatrix out = CMatrix::Zero(2, 2);
      for (int j = 0; j < 3; ++j) out += w[j] * t.hess[j];
      return out;
    }
    const Poly p = id_ == 3 ? poly3(z) : from_terms(terms(z));
    return w[0] * p.hess;
  }

  /// The critical points quoted for this example, in table order:
  /// global minimum, local minima, saddle.
  std::vector<CriticalPointSeed> seeds() const {
    auto pt = [](double a, double b) { return make_point({Complex(a), Complex(b)}); };
    switch (id_) {
      case 1:
        return {{"global", CriticalKind::global_min, pt(0, 0), 0.0},
                {"local", CriticalKind::local_min, pt(1.04987, 0.709507), 0.0460496},
                {"saddle", CriticalKind::saddle, pt(0.577876, 0.378919), 0.11525}};
      case 2:
        return {{"global", CriticalKind::global_min, pt(0, 0), 0.0},
                {"local", CriticalKind::local_min, pt(1.27473, 1.81735), 0.527264593},
                {"saddle", CriticalKind::saddle, pt(1, 1), 1.0}};
      default:
        return {
            {"global", CriticalKind::global_min, pt(-0.31767219617, -0.31767219617),
             0.83717564078542},
            {"local_1", CriticalKind::local_min, pt(0.1537213755, -1.53568738679),
             0.90983005625052},
            {"local_2", CriticalKind::local_min, pt(-1.53568738679, 0.153721375541),
             0.90983005625052},
            {"saddle", CriticalKind::saddle, pt(-1, 0), 1.0}};
    }
  }

 private:
  struct Terms {
    std::array<Complex, 3> value;
    std::array<CVector, 3> grad;
    std::array<CMatrix, 3> hess;
  };
  struct Poly {
    Complex value;
    CVector grad;
    CMatrix hess;
  };

  // Examples 1-2: t1 = a1 z1 + a2 z2, t2 = z1 (1 - z1), t3 = z2 (c - z2)
  Terms terms(const CVector& z) const {
    const double a1 = id_ == 1 ? 2.0 : 1.0;
    const double a2 = id_ == 1 ? -3.0 : -1.0;
    const double c = id_ == 1 ? 1.0 : 2.0;
    Terms t;
    t.value = {a1 * z[0] + a2 * z[1], z[0] * (1.0 - z[0]), z[1] * (c - z[1])};
    for (auto& g : t.grad) g = CVector::Zero(2);
    for (auto& h : t.hess) h = CMatrix::Zero(2, 2);
    t.grad[0] << a1, a2;
    t.grad[1][0] = 1.0 - 2.0 * z[0];
    t.grad[2][1] = c - 2.0 * z[1];
    t.hess[1](0, 0) = -2.0;
    t.hess[2](1, 1) = -2.0;
    return t;
  }

  static Poly from_terms(const Terms& t) {
    Poly p{0.0, CVector::Zero(2), CMatrix::Zero(2, 2)};
    for (int j = 0; j < 3; ++j) {
      p.value += t.value[j] * t.value[j];
      p.grad += 2.0 * t.value[j] * t.grad[j];
      p.hess += 2.0 * (t.grad[j] * t.grad[j].transpose() + t.value[j] * t.hess[j]);
    }
    return p;
  }

  static Poly poly3(const CVector& z) {
    const Complex u = z[0] + 1.0, v = z[1] + 1.0;
    Poly p{u * u * u * u + v * v * v * v + 4.0 * z[0] * z[1], CVector(2), CMatrix(2, 2)};
    p.grad << 4.0 * u * u * u + 4.0 * z[1], 4.0 * v * v * v + 4.0 * z[0];
    p.hess << 12.0 * u * u, 4.0, 4.0, 12.0 * v * v;
    return p;
  }

  int id_;
  ResidualMode mode_;
  double shift_;
};

inline constexpr double kExample3Optimum = 0.83717564078542;

/// Shift subtracted from F in single-residual mode. On the real slice the
/// repulsive iteration is stable at a minimum x* only when
/// F(x*) lambda_max(F''(x*)) < 4 gamma^2, so it can settle only on (near-)zeros
/// of g0; Example 3's positive optimum is removed for it. Ordinary Newton
/// works on F itself.
inline double default_shift(int id, Method method = Method::rmnm_repulsive) {
  return id == 3 && method != Method::onm ? kExample3Optimum : 0.0;
}

inline PolynomialExample example(int id, ResidualMode mode = ResidualMode::single,
                                 Method method = Method::rmnm_repulsive) {
  return PolynomialExample(id, mode, mode == ResidualMode::single ? default_shift(id, method) : 0.0);
}

struct CriticalPointRecord {
  std::string label;
  CriticalKind kind;
  CVector location;
  double objective = 0.0;  // polynomial value
  double grad_norm = 0.0;  // ||grad F||
};

/// Damped Newton on grad F = 0 from a quoted seed.
inline CriticalPointRecord refine_seed(const PolynomialExample& ex, const CriticalPointSeed& seed,
                                       double grad_tol = 1e-12, int max_iters = 100) {
  RVector x = seed.location.real();
  auto grad_at = [&](const RVector& p) {
    return RVector(ex.polynomial_derivatives(p.cast<Complex>()).first.real());
  };
  RVector g = grad_at(x);
  for (int it = 0; it < max_iters && g.norm() >= grad_tol; ++it) {
    const RMatrix h = ex.polynomial_derivatives(x.cast<Complex>()).second.real();
    const RVector step = h.fullPivLu().solve(g);
    double t = 1.0;
    RVector trial = x - step;
    RVector gt = grad_at(trial);
    while (gt.norm() > g.norm() && t > 1e-8) {
      t *= 0.5;
      trial = x - t * step;
      gt = grad_at(trial);
    }
    if (gt.norm() >= g.norm()) break;
    x = trial;
    g = gt;
  }
  CriticalPointRecord rec{seed.label, seed.kind, x.cast<Complex>(), 0.0, g.norm()};
  rec.objective = ex.polynomial(rec.location).real();
  return rec;
}

inline std::vector<CriticalPointRecord> known_critical_points(const PolynomialExample& ex) {
  std::vector<CriticalPointRecord> out;
  for (const auto& s : ex.seeds()) out.push_back(refine_seed(ex, s));
  return out;
}

/// k x k inclusive grid on [lo, hi]^2, row-major in (x1, x2); every
/// coordinate is shifted by imag_offset.
inline std::vector<CVector> grid(double lo, double hi, long count, Complex imag_offset = 0.0) {
  if (!(hi > lo)) throw std::invalid_argument("grid needs hi > lo");
  const long k = std::lround(std::sqrt(static_cast<double>(count)));
  if (count < 1 || k * k != count) throw std::invalid_argument("grid count must be a perfect square");
  std::vector<CVector> pts;
  pts.reserve(static_cast<std::size_t>(count));
  const double h = k > 1 ? (hi - lo) / static_cast<double>(k - 1) : 0.0;
  for (long i = 0; i < k; ++i) {
    for (long j = 0; j < k; ++j) {
      CVector p(2);
      p << Complex(lo + static_cast<double>(i) * h) + imag_offset,
          Complex(lo + static_cast<double>(j) * h) + imag_offset;
      pts.push_back(p);
    }
  }
  return pts;
}

struct BasinRecord {
  CVector start;
  CVector terminal;
  Status status = Status::max_iters;
  long iterations = 0;
  int matched = -1;  // index into the known critical points, -1 when none
};

struct BasinResult {
  int example = 0;
  Method method = Method::rmnm_repulsive;
  std::optional<double> gamma;
  std::vector<BasinRecord> records;
  std::vector<CriticalPointRecord> critical_points;

  long to_global = 0;
  std::vector<long> to_local;  // one entry per local minimum, in seed order
  long to_saddle = 0;
  long no_convergence = 0;

  long starts() const { return static_cast<long>(records.size()); }
};

struct BasinOptions {
  double match_tol = 1e-4;
  unsigned threads = 1;
};

/// Default stopping rule for basin runs. The gradient tolerance is tighter
/// than the general default: at a zero of the residual with vanishing
/// derivative (every single-residual global minimum) the gradient is cubic
/// in the distance, and 1e-10 leaves iterates ~3e-4 away. 1e-12 stops within
/// ~7e-5 on all three examples.
inline StopCriteria basin_stop_criteria(long max_iters = 1000000) {
  StopCriteria s;
  s.grad_tol = 1e-12;
  s.step_tol = 1e-12;
  s.max_iters = max_iters;
  return s;
}

inline BasinResult basin_experiment(const PolynomialExample& ex, const SolverConfig& config,
                                    const std::vector<CVector>& starts,
                                    const BasinOptions& opts = {}) {
  if (!(opts.match_tol > 0.0)) throw std::invalid_argument("match_tol must be positive");
  config.validate();
  SolverConfig cfg = config;
  cfg.keep_history = false;

  BasinResult out;
  out.example = ex.id();
  out.method = cfg.method;
  if (cfg.method == Method::rmnm_repulsive) out.gamma = cfg.penalty->gamma;
  out.critical_points = known_critical_points(ex);
  out.records.resize(starts.size());

  auto solve_one = [&](std::size_t idx) {
    const Trace tr = run(ex, starts[idx], cfg);
    BasinRecord rec{starts[idx], tr.last().z, tr.status, tr.iterations, -1};
    if (tr.status == Status::converged) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < out.critical_points.size(); ++c) {
        const double d = (rec.terminal - out.critical_points[c].location).norm();
        if (d < best) {
          best = d;
          rec.matched = static_cast<int>(c);
        }
      }
      if (!(best <= opts.match_tol)) rec.matched = -1;
    }
    out.records[idx] = std::move(rec);
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, starts.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < starts.size(); ++i) solve_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < starts.size(); i = next++) solve_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::size_t local_count = 0;
  for (const auto& c : out.critical_points) local_count += c.kind == CriticalKind::local_min;
  out.to_local.assign(local_count, 0);
  for (const auto& rec : out.records) {
    if (rec.matched < 0) {
      ++out.no_convergence;
      continue;
    }
    const auto& cp = out.critical_points[static_cast<std::size_t>(rec.matched)];
    switch (cp.kind) {
      case CriticalKind::global_min: ++out.to_global; break;
      case CriticalKind::saddle: ++out.to_saddle; break;
      case CriticalKind::local_min: {
        std::size_t slot = 0;
        for (int c = 0; c < rec.matched; ++c) {
          slot += out.critical_points[static_cast<std::size_t>(c)].kind == CriticalKind::local_min;
        }
        ++out.to_local[slot];
        break;
      }
    }
  }
  return out;
}

inline constexpr std::string_view kBasinCsvHeader =
    "example,method,gamma,starts,to_global,to_local_1,to_local_2,to_saddle,no_convergence";

namespace detail {

inline std::vector<std::string> basin_row(const BasinResult& r) {
  std::ostringstream gamma;
  if (r.gamma) gamma << std::setprecision(6) << *r.gamma;
  auto local = [&](std::size_t i) {
    return i < r.to_local.size() ? std::to_string(r.to_local[i]) : std::string();
  };
  return {std::to_string(r.example), std::string(to_string(r.method)), gamma.str(),
          std::to_string(r.starts()), std::to_string(r.to_global), local(0), local(1),
          std::to_string(r.to_saddle), std::to_string(r.no_convergence)};
}

}  // namespace detail

/// One CSV row per experiment, header always present. Missing second local
/// minimum (Examples 1-2) and missing gamma (ONM) are empty fields.
inline void write_basin_csv(std::ostream& os, const std::vector<BasinResult>& results) {
  os << kBasinCsvHeader << '\n';
  for (const auto& r : results) {
    const auto row = detail::basin_row(r);
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
}

inline void write_basin_table(std::ostream& os, const std::vector<BasinResult>& results) {
  const std::vector<std::string> head = {"example", "method",     "gamma",     "starts",
                                         "global",  "local 1",    "local 2",   "saddle",
                                         "no conv."};
  std::vector<std::vector<std::string>> rows = {head};
  for (const auto& r : results) rows.push_back(detail::basin_row(r));
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << row[i];
    }
    os << '\n';
  }
}

}  // namespace mixnewton
