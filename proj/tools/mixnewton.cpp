// mixnewton: basin experiments, stability verification, MLP training.
//
// exit codes: 0 success, 1 runtime or verification failure, 2 usage error

#include "mixnewton/analysis.hpp"
#include "mixnewton/fd_oracle.hpp"
#include "mixnewton/models.hpp"
#include "mixnewton/testbed.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

using namespace mixnewton;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// key = value lines, insertion ordered
class Manifest {
 public:
  template <class T>
  void set(const std::string& k, const T& v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    entries_.emplace_back(k, os.str());
  }
  void write(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest " + path);
    for (const auto& [k, v] : entries_) f << k << " = " << v << '\n';
    if (!f) throw std::runtime_error("write failed for " + path);
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

unsigned resolve_threads(long flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("MN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct BasinsArgs {
  int example = 1;
  std::string method = "rmnm";
  std::optional<double> gamma;
  std::optional<long> grid;
  std::vector<double> square;
  double imag_offset = 0.0;
  long max_iters = 1000000;
  double match_tol = 1e-4;
  std::string mode = "single";
  std::optional<double> shift;
  std::string out = "basins.csv";
  long threads = 0;
};

int cmd_basins(const BasinsArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto method = parse_method(a.method);
  if (!method || (*method != Method::rmnm_repulsive && *method != Method::onm)) {
    throw UsageError("--method must be rmnm or onm");
  }
  const ResidualMode mode = a.mode == "terms" ? ResidualMode::terms : ResidualMode::single;
  if (mode == ResidualMode::terms && a.example == 3) throw UsageError("example 3 has no terms mode");
  if (mode == ResidualMode::terms && a.shift) throw UsageError("--shift applies to single mode only");

  static const std::map<int, std::tuple<double, long, double, double>> defaults = {
      {1, {1e-3, 625, -1.0, 2.0}}, {2, {1e-3, 1024, -1.0, 3.0}}, {3, {1e-2, 2601, -3.0, 2.0}}};
  const auto& [def_gamma, def_grid, def_lo, def_hi] = defaults.at(a.example);
  const double gamma = a.gamma.value_or(def_gamma);
  const long count = a.grid.value_or(def_grid);
  const double lo = a.square.empty() ? def_lo : a.square[0];
  const double hi = a.square.empty() ? def_hi : a.square[1];
  const double shift = mode == ResidualMode::terms ? 0.0 : a.shift.value_or(default_shift(a.example, *method));

  std::vector<CVector> starts;
  try {
    starts = grid(lo, hi, count, Complex(0.0, a.imag_offset));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (*method == Method::onm && a.imag_offset != 0.0) throw UsageError("onm needs real starts");
  if (!(a.match_tol > 0.0)) throw UsageError("--match-tol must be positive");
  if (a.max_iters < 0) throw UsageError("--max-iters must be >= 0");

  const PolynomialExample ex(a.example, mode, shift);
  SolverConfig cfg;
  cfg.method = *method;
  if (*method == Method::rmnm_repulsive) cfg.penalty = PenaltyParams{gamma};
  cfg.stop = basin_stop_criteria(a.max_iters);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  BasinOptions opts;
  opts.match_tol = a.match_tol;
  opts.threads = resolve_threads(a.threads);

  const BasinResult r = basin_experiment(ex, cfg, starts, opts);

  std::ofstream csv(a.out);
  if (!csv) throw std::runtime_error("cannot write " + a.out);
  write_basin_csv(csv, {r});
  csv.close();
  if (!csv) throw std::runtime_error("write failed for " + a.out);
  write_basin_table(std::cout, {r});

  long total_iters = 0;
  std::map<std::string, long> status_counts;
  for (const auto& rec : r.records) {
    total_iters += rec.iterations;
    ++status_counts[std::string(to_string(rec.status))];
  }
  Manifest m;
  m.set("command", "basins");
  m.set("example", a.example);
  m.set("method", to_string(*method));
  m.set("residual_mode", a.mode);
  m.set("shift", shift);
  if (*method == Method::rmnm_repulsive) m.set("gamma", gamma);
  m.set("grid", count);
  m.set("square_lo", lo);
  m.set("square_hi", hi);
  m.set("imag_offset", a.imag_offset);
  m.set("max_iters", cfg.stop.max_iters);
  m.set("grad_tol", cfg.stop.grad_tol);
  m.set("step_tol", cfg.stop.step_tol);
  m.set("divergence_bound", cfg.stop.divergence_bound);
  m.set("match_tol", a.match_tol);
  m.set("threads", opts.threads);
  m.set("csv", a.out);
  for (const auto& [k, v] : status_counts) m.set("status_" + k, v);
  m.set("total_iterations", total_iters);
  m.set("wall_seconds", seconds_since(t0));
  m.write(a.out + ".manifest");
  return kExitOk;
}

// ---------------------------------------------------------------------------

// Jacobian scaled by a constant: values stay right, so finite differences
// of f expose the wrong derivative.
template <ResidualModel S>
class BrokenDerivative {
 public:
  explicit BrokenDerivative(S base) : base_(std::move(base)) {}
  Index dimension() const { return base_.dimension(); }
  Index residual_count() const { return base_.residual_count(); }
  CVector values(const CVector& z) const { return base_.values(z); }
  ResidualJet jet(const CVector& z) const {
    ResidualJet j = base_.jet(z);
    j.jacobian *= 1.01;
    return j;
  }
  CMatrix weighted_hessian(const CVector& z, const CVector& w) const {
    return base_.weighted_hessian(z, w);
  }

 private:
  S base_;
};

struct VerifyArgs {
  int example = 1;
  long trials = 10;
  std::uint64_t seed = 1;
  bool break_derivative = false;
};

class Report {
 public:
  void check(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    if (!ok) failed_.push_back(name);
  }
  bool ok() const { return failed_.empty(); }
  const std::vector<std::string>& failed() const { return failed_; }

 private:
  std::vector<std::string> failed_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

template <ResidualModel S>
void verify_system(Report& rep, const std::string& tag, const S& sys,
                   const std::vector<CriticalPointRecord>& cps, long trials, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  double worst_grad = 0, worst_b = 0, worst_a = 0, worst_psd = 0;
  for (long t = 0; t < trials; ++t) {
    CVector z(sys.dimension());
    for (Index i = 0; i < z.size(); ++i) z[i] = 0.5 * Complex(nd(rng), nd(rng));
    const WirtingerEval ev = evaluate(sys, z, true);
    const FdEstimate fd = fd_oracle(sys, z);
    worst_grad = std::max(worst_grad, relative_error(ev.grad_zbar, fd.grad_zbar));
    worst_b = std::max(worst_b, relative_error(ev.B.matrix(), fd.B));
    worst_a = std::max(worst_a, relative_error(*ev.A, fd.A));
    const double scale = std::max(1.0, ev.B.matrix().norm());
    worst_psd = std::min(worst_psd, min_eigenvalue(ev.B) / scale);
  }
  rep.check(tag + " gradient vs finite differences", worst_grad < 1e-6, "max rel err " + fmt(worst_grad));
  rep.check(tag + " mixed Hessian vs finite differences", worst_b < 1e-6, "max rel err " + fmt(worst_b));
  rep.check(tag + " A block vs finite differences", worst_a < 1e-6, "max rel err " + fmt(worst_a));
  rep.check(tag + " mixed Hessian PSD", worst_psd >= -1e-8, "min scaled eigenvalue " + fmt(worst_psd));

  long theorem_bad = 0, sig_bad = 0, maxima = 0, cases = 0;
  double sim_gap = 0, id_gap = 0;
  for (const auto& cp : cps) {
    Classified c;
    try {
      c = classify(sys, cp.location);
    } catch (const NotCriticalError&) {
      ++theorem_bad;
      continue;
    }
    if (c.classification == Classification::maximum) ++maxima;
    for (long t = 0; t < trials; ++t) {
      const HermitianMatrix P = random_hpd(sys.dimension(), rng);
      const DynamicsReport d = linearized_dynamics(sys, cp.location, P);
      ++cases;
      theorem_bad += !stability_theorem_holds(d);
      sig_bad += !d.congruent_signature;
      sim_gap = std::max(sim_gap, d.similarity_gap);
      id_gap = std::max(id_gap, d.identity_gap);
    }
  }
  rep.check(tag + " stability theorem", theorem_bad == 0,
            std::to_string(theorem_bad) + " counterexamples in " + std::to_string(cases) + " cases");
  rep.check(tag + " signature(M') = signature(M)", sig_bad == 0, std::to_string(sig_bad) + " mismatches");
  rep.check(tag + " spectrum(Y') = spectrum(Y)", sim_gap < 1e-8, "max gap " + fmt(sim_gap));
  rep.check(tag + " M' = I - Y'", id_gap < 1e-10, "max gap " + fmt(id_gap));
  rep.check(tag + " no maxima", maxima == 0, std::to_string(maxima) + " maxima");
}

int cmd_verify(const VerifyArgs& a) {
  if (a.trials < 1) throw UsageError("--trials must be >= 1");
  std::mt19937_64 rng(a.seed);
  Report rep;
  std::vector<std::pair<std::string, PolynomialExample>> forms;
  if (a.example == 3) {
    forms.emplace_back("single g0=F", PolynomialExample(3, ResidualMode::single, 0.0));
    forms.emplace_back("single g0=F-f*", PolynomialExample(3, ResidualMode::single, kExample3Optimum));
  } else {
    forms.emplace_back("single", PolynomialExample(a.example, ResidualMode::single, 0.0));
    forms.emplace_back("terms", PolynomialExample(a.example, ResidualMode::terms, 0.0));
  }
  for (const auto& [name, ex] : forms) {
    const auto cps = known_critical_points(ex);
    const std::string tag = "example " + std::to_string(a.example) + " " + name + ":";
    if (a.break_derivative) {
      verify_system(rep, tag, BrokenDerivative<PolynomialExample>(ex), cps, a.trials, rng);
    } else {
      verify_system(rep, tag, ex, cps, a.trials, rng);
    }
  }
  if (!rep.ok()) {
    std::cerr << "failed: " << rep.failed().front() << '\n';
    return kExitFail;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string method = "lm-mnm";
  std::string init = "complex";
  double std_dev = 0.1;
  std::uint64_t seed = 0;
  long iters = 200;
  long hidden = 10;
  std::string split = "none";
  std::string out = "train.csv";
  double lambda0 = 0.01, alpha = 10.0, mu = 1.0, lipschitz = 1.0;
};

int cmd_train(const TrainArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto method = parse_method(a.method);
  if (!method || (*method != Method::lm_mnm && *method != Method::lm_nm && *method != Method::cnm &&
                  *method != Method::cmnm)) {
    throw UsageError("--method must be lm-mnm, lm-nm, cnm or cmnm");
  }
  const auto axis = parse_init_axis(a.init);
  if (!axis) throw UsageError("--init must be real, imaginary or complex");
  if (a.split != "none" && a.split != "0.8") throw UsageError("--split must be none or 0.8");
  if (a.hidden < 1) throw UsageError("--hidden must be >= 1");
  if (a.iters < 0) throw UsageError("--iters must be >= 0");

  std::ifstream in(a.data);
  if (!in) throw std::runtime_error("cannot read data file " + a.data);
  Dataset full = parse_libsvm(in);
  full.normalize();
  const double fraction = a.split == "none" ? 1.0 : 0.8;
  auto [train_set, test_set] = split_dataset(full, fraction, a.seed);

  SolverConfig cfg;
  cfg.method = *method;
  cfg.lm = LmParams{a.lambda0, a.alpha, a.mu};
  cfg.cubic.lipschitz = a.lipschitz;
  InitSpec init{*axis, a.std_dev, a.seed};
  try {
    cfg.validate();
    init.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const TrainResult r = train(train_set, a.hidden, init, cfg, a.iters, fraction < 1.0 ? &test_set : nullptr);

  std::ofstream csv(a.out);
  if (!csv) throw std::runtime_error("cannot write " + a.out);
  write_train_csv(csv, r.history);
  csv.close();
  if (!csv) throw std::runtime_error("write failed for " + a.out);

  const double max_imag = r.params.imag().cwiseAbs().maxCoeff();
  std::cout << std::setprecision(6) << "method " << to_string(*method) << "  status "
            << to_string(r.trace.status) << "  iterations " << r.trace.iterations << '\n'
            << "train mse " << r.final_train.mse << "  r2 " << r.final_train.r2 << "  nmse_db "
            << r.final_train.nmse_db << '\n';
  if (r.final_test) {
    std::cout << "test  mse " << r.final_test->mse << "  r2 " << r.final_test->r2 << "  nmse_db "
              << r.final_test->nmse_db << '\n';
  }
  std::cout << "max |Im(params)| " << max_imag << '\n';

  Manifest m;
  m.set("command", "train");
  m.set("data", a.data);
  m.set("rows", full.size());
  m.set("features", full.feature_count());
  m.set("method", to_string(*method));
  m.set("init", to_string(*axis));
  m.set("init_std", a.std_dev);
  m.set("seed", a.seed);
  m.set("iters", a.iters);
  m.set("hidden", a.hidden);
  m.set("parameters", MlpShape{full.feature_count(), a.hidden}.parameter_count());
  m.set("split", a.split);
  m.set("lambda0", a.lambda0);
  m.set("alpha", a.alpha);
  m.set("mu", a.mu);
  m.set("lipschitz", a.lipschitz);
  m.set("csv", a.out);
  m.set("status", to_string(r.trace.status));
  m.set("iterations", r.trace.iterations);
  m.set("train_mse", r.final_train.mse);
  m.set("train_r2", r.final_train.r2);
  m.set("train_nmse_db", r.final_train.nmse_db);
  if (r.final_test) {
    m.set("test_mse", r.final_test->mse);
    m.set("test_r2", r.final_test->r2);
  }
  m.set("max_abs_imag_params", max_imag);
  m.set("wall_seconds", seconds_since(t0));
  m.write(a.out + ".manifest");
  return r.trace.status == Status::numeric_error ? kExitFail : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixed Newton experiments"};
  app.require_subcommand(1);

  BasinsArgs ba;
  auto* basins = app.add_subcommand("basins", "basin-of-attraction experiment on a polynomial example");
  basins->add_option("--example", ba.example)->check(CLI::IsMember({1, 2, 3}));
  basins->add_option("--method", ba.method, "rmnm or onm");
  basins->add_option("--gamma", ba.gamma, "rmnm penalty weight (default 1e-3, 1e-2 for example 3)");
  basins->add_option("--grid", ba.grid, "number of starts, a perfect square");
  basins->add_option("--square", ba.square, "LO HI")->expected(2);
  basins->add_option("--imag-offset", ba.imag_offset, "imaginary part added to every coordinate");
  basins->add_option("--max-iters", ba.max_iters);
  basins->add_option("--match-tol", ba.match_tol);
  basins->add_option("--mode", ba.mode, "single or terms")->check(CLI::IsMember({"single", "terms"}));
  basins->add_option("--shift", ba.shift, "constant subtracted from the polynomial in single mode");
  basins->add_option("--out", ba.out, "CSV path; the manifest goes next to it");
  basins->add_option("--threads", ba.threads, "worker count (default MN_THREADS or all cores)");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "derivative, PSD and local stability checks");
  verify->add_option("--example", va.example)->check(CLI::IsMember({1, 2, 3}));
  verify->add_option("--trials", va.trials, "random points and random P per critical point");
  verify->add_option("--seed", va.seed);
  verify->add_flag("--break-derivative", va.break_derivative, "corrupt the Jacobian (negative control)");

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "train the one-hidden-layer network");
  trainc->add_option("--data", ta.data, "LIBSVM file")->required();
  trainc->add_option("--method", ta.method, "lm-mnm, lm-nm, cnm or cmnm");
  trainc->add_option("--init", ta.init, "real, imaginary or complex");
  trainc->add_option("--std", ta.std_dev);
  trainc->add_option("--seed", ta.seed);
  trainc->add_option("--iters", ta.iters);
  trainc->add_option("--hidden", ta.hidden);
  trainc->add_option("--split", ta.split, "none or 0.8");
  trainc->add_option("--out", ta.out, "metrics CSV path; the manifest goes next to it");
  trainc->add_option("--lambda0", ta.lambda0);
  trainc->add_option("--alpha", ta.alpha);
  trainc->add_option("--mu", ta.mu);
  trainc->add_option("--lipschitz", ta.lipschitz);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*basins) return cmd_basins(ba);
    if (*verify) return cmd_verify(va);
    if (*trainc) return cmd_train(ta);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitUsage;
}
