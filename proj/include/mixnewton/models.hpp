#pragma once

// One-hidden-layer tanh regression network with complex parameters, posed
// as a residual system over the flat parameter vector.

#include "mixnewton/solvers.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mixnewton {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

struct Normalization {
  RVector feature_mean;
  RVector feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;
};

struct Dataset {
  RMatrix features;  // N x M
  RVector targets;
  Normalization stats;
  bool normalized = false;

  Index size() const { return features.rows(); }
  Index feature_count() const { return features.cols(); }

  // population statistics; a constant column keeps std 1
  void normalize() {
    const Index n = size();
    if (n < 2) throw std::invalid_argument("need at least two rows to normalize");
    stats.feature_mean = features.colwise().mean().transpose();
    stats.feature_std.resize(feature_count());
    for (Index c = 0; c < feature_count(); ++c) {
      features.col(c).array() -= stats.feature_mean[c];
      const double s = std::sqrt(features.col(c).squaredNorm() / static_cast<double>(n));
      stats.feature_std[c] = s > 1e-300 ? s : 1.0;
      features.col(c) /= stats.feature_std[c];
    }
    stats.target_mean = targets.mean();
    targets.array() -= stats.target_mean;
    const double s = std::sqrt(targets.squaredNorm() / static_cast<double>(n));
    stats.target_std = s > 1e-300 ? s : 1.0;
    targets /= stats.target_std;
    normalized = true;
  }

  double denormalize_target(double y) const { return y * stats.target_std + stats.target_mean; }

  Dataset rows(const std::vector<Index>& idx) const {
    Dataset d;
    d.features.resize(static_cast<Index>(idx.size()), feature_count());
    d.targets.resize(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      d.features.row(static_cast<Index>(i)) = features.row(idx[i]);
      d.targets[static_cast<Index>(i)] = targets[idx[i]];
    }
    d.stats = stats;
    d.normalized = normalized;
    return d;
  }
};

/// `<label> <idx>:<value> ...` per line, 1-based strictly increasing indices.
inline Dataset parse_libsvm(std::istream& in) {
  struct Row {
    double label;
    std::vector<std::pair<long, double>> entries;
  };
  std::vector<Row> rows;
  long max_index = 0;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ss(line);
    Row row;
    std::string tok;
    ss >> tok;
    try {
      std::size_t used = 0;
      row.label = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError("bad label '" + tok + "'", lineno);
    }
    long prev = 0;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        throw ParseError("expected idx:value, got '" + tok + "'", lineno);
      }
      long idx = 0;
      double val = 0.0;
      try {
        std::size_t u1 = 0, u2 = 0;
        const std::string is = tok.substr(0, colon), vs = tok.substr(colon + 1);
        idx = std::stol(is, &u1);
        val = std::stod(vs, &u2);
        if (u1 != is.size() || u2 != vs.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("bad entry '" + tok + "'", lineno);
      }
      if (idx < 1) throw ParseError("feature index must be >= 1", lineno);
      if (idx <= prev) throw ParseError("feature indices must be strictly increasing", lineno);
      if (!std::isfinite(val)) throw ParseError("non-finite value", lineno);
      prev = idx;
      row.entries.emplace_back(idx, val);
    }
    max_index = std::max(max_index, prev);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no data rows", lineno);
  if (max_index == 0) throw ParseError("no features", lineno);

  Dataset d;
  d.features = RMatrix::Zero(static_cast<Index>(rows.size()), max_index);
  d.targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    d.targets[static_cast<Index>(r)] = rows[r].label;
    for (const auto& [idx, val] : rows[r].entries) d.features(static_cast<Index>(r), idx - 1) = val;
  }
  return d;
}

struct MlpShape {
  Index inputs = 8;   // M
  Index hidden = 10;  // H

  Index parameter_count() const { return (inputs + 1) * hidden + (hidden + 1); }
  // flat layout: W1 row-major (H x M), b1 (H), w2 (H), b2
  Index w1(Index h, Index m) const { return h * inputs + m; }
  Index b1(Index h) const { return hidden * inputs + h; }
  Index w2(Index h) const { return hidden * (inputs + 1) + h; }
  Index b2() const { return hidden * (inputs + 2); }
  // hidden-unit input index, m == inputs meaning the bias
  Index pre(Index h, Index m) const { return m < inputs ? w1(h, m) : b1(h); }
};

inline constexpr double kTanhPoleTolerance = 1e-12;

/// r_j(theta) = (w2^T tanh(W1 x_j + b1) + b2 - y_j) / sqrt(N), holomorphic in theta.
class MlpResiduals {
 public:
  MlpResiduals(const Dataset& data, Index hidden) : data_(&data), shape_{data.feature_count(), hidden} {
    if (hidden < 1) throw std::invalid_argument("hidden width must be positive");
    if (data.size() < 1) throw std::invalid_argument("empty dataset");
    scale_ = 1.0 / std::sqrt(static_cast<double>(data.size()));
  }

  const MlpShape& shape() const { return shape_; }
  Index dimension() const { return shape_.parameter_count(); }
  Index residual_count() const { return data_->size(); }

  CVector predictions(const CVector& theta) const {
    CVector out(residual_count());
    CVector t(shape_.hidden);
    for (Index j = 0; j < residual_count(); ++j) {
      hidden_units(theta, j, t, nullptr);
      out[j] = output(theta, t);
    }
    return out;
  }

  CVector values(const CVector& theta) const {
    CVector out = predictions(theta);
    for (Index j = 0; j < residual_count(); ++j) out[j] = (out[j] - data_->targets[j]) * scale_;
    return out;
  }

  ResidualJet jet(const CVector& theta) const {
    const Index n = residual_count(), H = shape_.hidden, M = shape_.inputs;
    ResidualJet out{CVector(n), CMatrix::Zero(n, dimension())};
    CVector t(H), s2(H);
    for (Index j = 0; j < n; ++j) {
      hidden_units(theta, j, t, &s2);
      out.values[j] = (output(theta, t) - data_->targets[j]) * scale_;
      for (Index h = 0; h < H; ++h) {
        const Complex c = theta[shape_.w2(h)] * s2[h] * scale_;
        for (Index m = 0; m < M; ++m) out.jacobian(j, shape_.w1(h, m)) = c * data_->features(j, m);
        out.jacobian(j, shape_.b1(h)) = c;
        out.jacobian(j, shape_.w2(h)) = t[h] * scale_;
      }
      out.jacobian(j, shape_.b2()) = scale_;
    }
    return out;
  }

  CMatrix weighted_hessian(const CVector& theta, const CVector& w) const {
    const Index n = residual_count(), H = shape_.hidden, M = shape_.inputs;
    const Index P = dimension();
    CMatrix out = CMatrix::Zero(P, P);
    CVector t(H), s2(H);
    RVector x(M + 1);
    x[M] = 1.0;
    for (Index j = 0; j < n; ++j) {
      if (w[j] == Complex(0.0)) continue;
      hidden_units(theta, j, t, &s2);
      x.head(M) = data_->features.row(j).transpose();
      for (Index h = 0; h < H; ++h) {
        const Complex ws2 = w[j] * scale_ * s2[h];
        // d/da sech^2(a) = -2 sech^2(a) tanh(a)
        const Complex curv = -2.0 * ws2 * t[h] * theta[shape_.w2(h)];
        for (Index a = 0; a <= M; ++a) {
          const Index ia = shape_.pre(h, a);
          out(shape_.w2(h), ia) += ws2 * x[a];
          for (Index b = a; b <= M; ++b) out(ia, shape_.pre(h, b)) += curv * x[a] * x[b];
        }
      }
    }
    // fill the symmetric counterparts of the blocks written one way
    for (Index h = 0; h < H; ++h) {
      for (Index a = 0; a <= M; ++a) {
        const Index ia = shape_.pre(h, a);
        out(ia, shape_.w2(h)) = out(shape_.w2(h), ia);
        for (Index b = a + 1; b <= M; ++b) out(shape_.pre(h, b), ia) = out(ia, shape_.pre(h, b));
      }
    }
    return out;
  }

 private:
  void hidden_units(const CVector& theta, Index j, CVector& t, CVector* sech2) const {
    for (Index h = 0; h < shape_.hidden; ++h) {
      Complex a = theta[shape_.b1(h)];
      for (Index m = 0; m < shape_.inputs; ++m) a += theta[shape_.w1(h, m)] * data_->features(j, m);
      const Complex ch = std::cosh(a);
      if (!(std::abs(ch) >= kTanhPoleTolerance)) {
        throw EvaluationError("tanh pole at sample " + std::to_string(j), j);
      }
      t[h] = std::sinh(a) / ch;
      if (sech2) (*sech2)[h] = 1.0 / (ch * ch);
    }
  }

  Complex output(const CVector& theta, const CVector& t) const {
    Complex y = theta[shape_.b2()];
    for (Index h = 0; h < shape_.hidden; ++h) y += theta[shape_.w2(h)] * t[h];
    return y;
  }

  const Dataset* data_;
  MlpShape shape_;
  double scale_ = 1.0;
};

enum class InitAxis { real, imaginary, complex };

inline std::optional<InitAxis> parse_init_axis(std::string_view s) {
  if (s == "real") return InitAxis::real;
  if (s == "imaginary") return InitAxis::imaginary;
  if (s == "complex") return InitAxis::complex;
  return std::nullopt;
}

inline std::string_view to_string(InitAxis a) {
  switch (a) {
    case InitAxis::real: return "real";
    case InitAxis::imaginary: return "imaginary";
    case InitAxis::complex: return "complex";
  }
  return "unknown";
}

struct InitSpec {
  InitAxis axis = InitAxis::complex;
  double std = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(std > 0.0) || !std::isfinite(std)) throw std::invalid_argument("init std must be positive");
  }
};

inline CVector init_params(const InitSpec& spec, const MlpShape& shape) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd(0.0, spec.std);
  CVector theta(shape.parameter_count());
  for (Index k = 0; k < theta.size(); ++k) {
    switch (spec.axis) {
      case InitAxis::real: theta[k] = Complex(nd(rng), 0.0); break;
      case InitAxis::imaginary: theta[k] = Complex(0.0, nd(rng)); break;
      case InitAxis::complex: {
        const double re = nd(rng);
        theta[k] = Complex(re, nd(rng));
        break;
      }
    }
  }
  return theta;
}

struct Metrics {
  double mse = 0.0;
  double r2 = 0.0;
  double nmse_db = 0.0;
};

inline double population_variance(const RVector& y) {
  return (y.array() - y.mean()).square().mean();
}

inline double nmse_db(double mse) { return 20.0 * std::log10(mse); }

inline Metrics metrics(const CVector& pred, const RVector& y) {
  if (pred.size() != y.size()) throw std::invalid_argument("prediction and target lengths differ");
  if (y.size() < 2) throw std::invalid_argument("need at least two targets");
  const double var = population_variance(y);
  if (!(var > 0.0)) throw std::domain_error("R^2 undefined for constant targets");
  Metrics m;
  m.mse = (pred - y.cast<Complex>()).squaredNorm() / static_cast<double>(y.size());
  m.r2 = 1.0 - m.mse / var;
  m.nmse_db = nmse_db(m.mse);
  return m;
}

struct TrialAggregate {
  std::vector<double> aver, min, max;
};

inline TrialAggregate aggregate_trials(const std::vector<std::vector<double>>& traces) {
  if (traces.empty()) throw std::invalid_argument("no trials to aggregate");
  const std::size_t len = traces.front().size();
  for (const auto& t : traces) {
    if (t.size() != len) throw std::invalid_argument("trial series lengths differ");
  }
  TrialAggregate out;
  out.aver.assign(len, 0.0);
  out.min.assign(len, std::numeric_limits<double>::infinity());
  out.max.assign(len, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < len; ++i) {
    for (const auto& t : traces) {
      out.aver[i] += t[i];
      out.min[i] = std::min(out.min[i], t[i]);
      out.max[i] = std::max(out.max[i], t[i]);
    }
    out.aver[i] /= static_cast<double>(traces.size());
  }
  return out;
}

/// Train / held-out partition by a seeded shuffle. fraction 1 keeps everything.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("split fraction must be in (0, 1]");
  std::vector<Index> idx(static_cast<std::size_t>(d.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (fraction >= 1.0) return {d.rows(idx), Dataset{}};
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
  return {d.rows({idx.begin(), idx.begin() + static_cast<long>(cut)}),
          d.rows({idx.begin() + static_cast<long>(cut), idx.end()})};
}

struct TrainPoint {
  long iter = 0;
  double mse = 0.0;
  double r2 = 0.0;
  double nmse_db = 0.0;
  double scalar = 0.0;  // lambda or delta
};

struct TrainResult {
  Trace trace;
  std::vector<TrainPoint> history;
  CVector params;
  Metrics final_train;
  std::optional<Metrics> final_test;
};

inline constexpr const char* kTrainCsvHeader = "iter,mse,r2,nmse_db,lambda_or_delta";

/// Runs `iters` iterations of the configured method. The objective is the
/// training MSE, so the per-iteration history comes straight from the trace.
inline TrainResult train(const Dataset& train_set, Index hidden, const InitSpec& init,
                         SolverConfig solver, long iters, const Dataset* test_set = nullptr) {
  if (!train_set.normalized) throw std::invalid_argument("dataset must be normalized");
  if (iters < 0) throw std::invalid_argument("iteration count must be >= 0");
  const MlpResiduals sys(train_set, hidden);
  solver.stop.max_iters = iters;
  solver.stop.grad_tol = 0.0;
  solver.stop.step_tol = 0.0;
  solver.keep_history = true;

  TrainResult out;
  out.trace = run(sys, init_params(init, sys.shape()), solver);
  const double var = population_variance(train_set.targets);
  for (const IterationRecord& r : out.trace.records) {
    out.history.push_back({r.k, r.f, 1.0 - r.f / var, nmse_db(r.f), std::isnan(r.scalar) ? 0.0 : r.scalar});
  }
  out.params = out.trace.last().z;
  out.final_train = metrics(sys.predictions(out.params), train_set.targets);
  if (test_set && test_set->size() >= 2) {
    const MlpResiduals test_sys(*test_set, hidden);
    out.final_test = metrics(test_sys.predictions(out.params), test_set->targets);
  }
  return out;
}

inline void write_train_csv(std::ostream& os, const std::vector<TrainPoint>& history) {
  os << kTrainCsvHeader << '\n';
  os << std::setprecision(17);
  for (const TrainPoint& p : history) {
    os << p.iter << ',' << p.mse << ',' << p.r2 << ',' << p.nmse_db << ',' << p.scalar << '\n';
  }
}

}  // namespace mixnewton
