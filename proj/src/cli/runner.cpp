#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>

#include "numlab/deep_linear.hpp"
#include "numlab/errors.hpp"
#include "numlab/experiment.hpp"
#include "numlab/kernels.hpp"
#include "numlab/relu_two_layer.hpp"
#include "numlab/scalar_dynamics.hpp"

namespace numlab::experiment {

namespace fs = std::filesystem;
namespace dl = deep_linear;

namespace {

// Collects artifacts and invariant violations for one invocation.
class Session {
 public:
  explicit Session(const ExperimentConfig& cfg) : cfg_(cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());
    result_.report["config"] = cfg.to_json();
  }

  json& report() { return result_.report; }
  const ExperimentConfig& cfg() const { return cfg_; }

  void violation(const std::string& what) { result_.violations.push_back(what); }

  std::ofstream open(const std::string& name) {
    const fs::path path = cfg_.output_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    result_.artifacts.push_back(path);
    return out;
  }

  void plot(const std::string& name, const std::vector<Series>& series,
            const std::string& title, const std::string& xl, const std::string& yl) {
    if (!cfg_.emits("svg")) return;
    const fs::path path = cfg_.output_dir / name;
    emit_plot(series, path, title, xl, yl);
    result_.artifacts.push_back(path);
  }

  RunResult finish() {
    result_.report["violations"] = result_.violations;
    result_.code = result_.violations.empty() ? ExitCode::Ok : ExitCode::Violation;
    {
      auto out = open("report.json");
      out << result_.report.dump(2) << '\n';
      if (!out) throw IoError("write failed for report.json");
    }
    json meta;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    meta["timestamp"] = stamp;
    meta["kernel_isa"] = std::string(kernels::to_string(kernels::active_isa()));
    auto out = open("metadata.json");
    out << meta.dump(2) << '\n';
    return std::move(result_);
  }

 private:
  const ExperimentConfig& cfg_;
  RunResult result_;
};

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json tail_json(const TailClass& t) {
  json j;
  j["kind"] = std::string(to_string(t.kind));
  j["period"] = t.period ? json(*t.period) : json(nullptr);
  j["amplitude"] = optional_json(t.amplitude);
  if (t.limit_state)
    j["limit_state"] = std::vector<double>(t.limit_state->data(),
                                           t.limit_state->data() + t.limit_state->size());
  else
    j["limit_state"] = nullptr;
  return j;
}

GDConfig engine_config(const ExperimentConfig& cfg, double delta, std::size_t iters) {
  GDConfig g;
  g.step_size = delta;
  g.max_iters = static_cast<std::size_t>(cfg.integer_or("iters", static_cast<long long>(iters)));
  g.grad_tol = cfg.number_or("grad_tol", g.grad_tol);
  g.orbit_tol = cfg.number_or("orbit_tol", g.orbit_tol);
  g.divergence_norm = cfg.number_or("divergence_norm", g.divergence_norm);
  g.max_period = static_cast<std::size_t>(cfg.integer_or("max_period", 8));
  g.record_stride = static_cast<std::size_t>(cfg.integer_or("record_stride", 1));
  g.seed = static_cast<std::uint64_t>(cfg.integer_or("seed", 0));
  try {
    g.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

std::uint64_t seed_of(const ExperimentConfig& cfg) {
  return static_cast<std::uint64_t>(cfg.integer_or("seed", 0));
}

scalar::Problem scalar_problem(const ExperimentConfig& cfg) {
  const std::string name = cfg.text_or("problem", "cusp");
  scalar::Problem p;
  if (name == "cusp") p = scalar::SqrtCusp{};
  else if (name == "quartic") p = scalar::Quartic{};
  else if (name == "power") p = scalar::Power{static_cast<int>(cfg.integer_or("L", 4))};
  else if (name == "chain")
    p = scalar::Chain{cfg.number_or("lambda", 4.0), static_cast<int>(cfg.integer_or("L", 2))};
  else throw ConfigError("parameter 'problem' must be cusp, quartic, power or chain");
  try {
    scalar::validate(p);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

void write_trajectory(Session& s, const Trajectory& traj, const std::string& title) {
  if (s.cfg().emits("csv")) {
    auto out = s.open("trajectory.csv");
    traj.write_csv(out);
  }
  if (traj.states.front().size() == 1) {
    Series series{"x", {}, {}};
    for (std::size_t i = 0; i < traj.size(); ++i) {
      series.x.push_back(static_cast<double>(traj.iter_indices[i]));
      series.y.push_back(traj.states[i][0]);
    }
    s.plot("trajectory.svg", {series}, title, "iteration", "x");
  } else {
    Series series{"loss", {}, {}};
    for (std::size_t i = 0; i < traj.size(); ++i) {
      series.x.push_back(static_cast<double>(traj.iter_indices[i]));
      series.y.push_back(std::log10(std::max(traj.losses[i], 1e-300)));
    }
    s.plot("trajectory.svg", {series}, title, "iteration", "log10 loss");
  }
}

json run_summary(const Trajectory& traj) {
  json j;
  j["iterations"] = traj.final_iter();
  j["stop"] = std::string(to_string(traj.stop));
  j["final_grad_norm"] = traj.final_grad_norm();
  j["final_loss"] = traj.losses.back();
  return j;
}

// ---- scalar examples ------------------------------------------------------

void example1(Session& s) {
  const auto& cfg = s.cfg();
  const double delta = cfg.number("delta");
  const double x0 = cfg.number("x0");
  const GDConfig g = engine_config(cfg, delta, 10000);
  const scalar::Problem p = scalar::SqrtCusp{};
  const Trajectory traj = iterate(scalar::make_dynamics(p, delta), scalar_state(x0), g);
  const TailClass tail = classify_tail(traj, g);

  const auto basin = scalar::example1_basin_set(delta, 16);
  const bool in_basin = std::any_of(basin.begin(), basin.end(), [&](double b) {
    return std::abs(b - x0) < g.orbit_tol;
  });
  json& r = s.report();
  r["problem"] = scalar::describe(p);
  r["bounds"] = {{"orbit_amplitude", scalar::example1_orbit_amplitude(delta)},
                 {"basin_set_prefix", basin}};
  r["x0_in_basin_prefix"] = in_basin;
  r["run"] = run_summary(traj);
  r["tail"] = tail_json(tail);
  write_trajectory(s, traj, "cusp iterates");
}

void example2(Session& s) {
  const auto& cfg = s.cfg();
  const double delta = cfg.number("delta");
  const double x0 = cfg.number("x0");
  const GDConfig g = engine_config(cfg, delta, 100000);
  const scalar::Problem p = scalar::Quartic{};
  const Trajectory traj = iterate(scalar::make_dynamics(p, delta), scalar_state(x0), g);
  const TailClass tail = classify_tail(traj, g);

  json minima = json::array();
  for (double xs : {1.0, 2.0}) {
    const double c = scalar::curvature_at(p, xs);
    minima.push_back({{"x", xs}, {"curvature", c}, {"threshold", 2.0 / c},
                      {"stable_at_delta", delta < 2.0 / c}});
  }
  json& r = s.report();
  r["problem"] = scalar::describe(p);
  r["bounds"] = {{"minima", minima}};
  r["run"] = run_summary(traj);
  r["tail"] = tail_json(tail);
  if (traj.stop == StopReason::Converged) {
    const double limit = traj.final_state()[0];
    for (const auto& mn : minima) {
      if (std::abs(limit - mn["x"].get<double>()) < 1e-6 && !mn["stable_at_delta"].get<bool>())
        s.violation("converged to x = " + mn["x"].dump() + " above its stability threshold");
    }
  }
  write_trajectory(s, traj, "quartic iterates");
}

void example3(Session& s) {
  const auto& cfg = s.cfg();
  const double delta = cfg.number("delta");
  const double x0 = cfg.number("x0");
  const int L = static_cast<int>(cfg.integer("L"));
  const GDConfig g = engine_config(cfg, delta, 100000);
  const scalar::Problem p = scalar::Power{L};
  try {
    scalar::validate(p);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const Trajectory traj = iterate(scalar::make_dynamics(p, delta), scalar_state(x0), g);
  const TailClass tail = classify_tail(traj, g);
  const double thr = scalar::example3_threshold(L, delta);

  json& r = s.report();
  r["problem"] = scalar::describe(p);
  r["bounds"] = {{"threshold", thr}};
  r["predicted"] = std::abs(x0) < thr ? "bounded" : "divergent";
  r["run"] = run_summary(traj);
  r["tail"] = tail_json(tail);
  // Only flag outcomes clearly away from the boundary.
  if (std::abs(x0) < 0.99 * thr && traj.diverged())
    s.violation("diverged from below the threshold");
  if (std::abs(x0) > 1.01 * thr && !traj.diverged() && tail.kind != TailKind::Undecided)
    s.violation("did not diverge from above the threshold");
  write_trajectory(s, traj, "x^L iterates");
}

// ---- deep linear ----------------------------------------------------------

struct PerturbationOutcome {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  // Largest distance from the equilibrium along the run.
  double max_distance = 0.0;
};

PerturbationOutcome perturb_and_run(const dl::DeepLinearNet& eq, const Eigen::MatrixXd& R,
                                    double delta, double eps, std::size_t iters,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  State x = eq.pack();
  State dir(x.size());
  for (auto& v : dir) v = normal(rng);
  x += eps * dir.normalized();
  PerturbationOutcome out;
  out.initial_loss = dl::loss(eq.unpack(x), R);
  const Dynamics dyn = dl::make_dynamics(eq, R, delta);
  const State eq_state = eq.pack();
  for (std::size_t k = 0; k < iters && x.allFinite() && x.norm() < 1e6; ++k) {
    x = dyn.step(x);
    out.max_distance = std::max(out.max_distance, (x - eq_state).norm());
  }
  if (!x.allFinite()) out.max_distance = std::numeric_limits<double>::infinity();
  out.final_loss = x.allFinite() ? dl::loss(eq.unpack(x), R)
                                 : std::numeric_limits<double>::infinity();
  return out;
}

void thm1_audit(Session& s) {
  const auto& cfg = s.cfg();
  std::mt19937_64 rng(seed_of(cfg));
  const double R = cfg.number_or("R", 4.0);
  const int L = static_cast<int>(cfg.integer_or("L", 2));
  const auto count = static_cast<std::size_t>(cfg.integer_or("count", 50));
  const auto iters = static_cast<std::size_t>(cfg.integer_or("iters", 1000));
  const double eps = cfg.number_or("perturbation", 1e-6);
  const double band = cfg.number_or("band", 0.02);
  if (L < 2) throw ConfigError("parameter 'L' must be at least 2");
  if (!(R > 0.0)) throw ConfigError("parameter 'R' must be positive");

  const Eigen::MatrixXd target = Eigen::MatrixXd::Constant(1, 1, R);
  std::uniform_real_distribution<double> log_scale(std::log(0.5), std::log(2.0));
  json rows = json::array();
  std::size_t agree = 0;
  std::optional<std::ofstream> csv;
  if (cfg.emits("csv")) {
    csv = s.open("thm1_audit.csv");
    *csv << "index,weights,thm1_bound,exact_threshold,loss_below,loss_above,returns_below,"
            "leaves_above\n";
  }
  for (std::size_t i = 0; i < count; ++i) {
    // Equilibrium of the scalar chain: weights with product R.
    std::vector<double> w(L);
    double prod = 1.0;
    for (int k = 0; k + 1 < L; ++k) {
      w[k] = std::pow(R, 1.0 / L) * std::exp(log_scale(rng));
      prod *= w[k];
    }
    w[L - 1] = R / prod;
    const auto net = dl::DeepLinearNet::scalars(w);
    dl::StabilityOptions opts;
    opts.target = target;
    const auto rep = dl::stability_check(net, 1.0, opts);
    const double thr = rep.exact_threshold;
    const auto below = perturb_and_run(net, target, (1.0 - band) * thr, eps, iters, rng);
    const auto above = perturb_and_run(net, target, (1.0 + band) * thr, eps, iters, rng);
    // Above the threshold the iterates often settle on a flatter equilibrium
    // with zero loss, so leaving is judged by distance, not by the final loss.
    const bool returns = below.final_loss <= below.initial_loss && below.max_distance <= 10.0 * eps;
    const bool leaves = above.max_distance > 10.0 * eps;
    if (returns && leaves) ++agree;
    if (thr > rep.thm1_bound * (1.0 + 1e-12))
      s.violation("equilibrium " + std::to_string(i) + ": exact threshold exceeds the bound");
    rows.push_back({{"weights", w},
                    {"thm1_bound", rep.thm1_bound},
                    {"lambda_max", rep.lambda_max},
                    {"exact_threshold", thr},
                    {"loss_below", below.final_loss},
                    {"loss_above", above.final_loss},
                    {"max_distance_below", below.max_distance},
                    {"max_distance_above", above.max_distance},
                    {"returns_below", returns},
                    {"leaves_above", leaves}});
    if (csv) {
      *csv << i << ',';
      for (int k = 0; k < L; ++k) *csv << (k ? ";" : "") << w[k];
      *csv << ',' << rep.thm1_bound << ',' << thr << ',' << below.final_loss << ','
          << above.final_loss << ',' << returns << ',' << leaves << '\n';
    }
  }
  json& r = s.report();
  r["seed"] = seed_of(cfg);
  r["equilibria"] = rows;
  r["agreeing"] = agree;
  r["count"] = count;
}

json identity_record_json(const dl::IdentityInitRecord& rec, const Eigen::MatrixXd& R) {
  json j;
  j["regime"] = std::string(dl::to_string(rec.regime));
  j["depth"] = rec.depth;
  j["step_size"] = rec.step_size;
  j["step_bound"] = rec.step_bound;
  j["step_within_bound"] = rec.step_within_bound;
  j["iterations"] = rec.iterations;
  j["converged"] = rec.converged;
  j["final_grad_norm"] = rec.final_grad_norm;
  j["target"] = matrix_json(R);
  j["product_limit"] = matrix_json(rec.product_limit);
  j["layer_limit"] = matrix_json(rec.layer_limit);
  j["final_layer_distance"] = rec.final_layer_distance;
  j["final_error"] = *std::max_element(rec.final_layer_distance.begin(),
                                       rec.final_layer_distance.end());
  j["final_product_error"] = rec.final_product_error;
  j["layer_distance_monotone"] = rec.layer_distance_monotone;
  j["eigenvalues"] = rec.eigenvalues;
  json beta = json::array(), rate = json::array();
  for (std::size_t i = 0; i < rec.eigenvalues.size(); ++i) {
    beta.push_back(optional_json(rec.predicted_beta[i]));
    rate.push_back(optional_json(rec.observed_rate[i]));
  }
  j["predicted_beta"] = beta;
  j["observed_rate"] = rate;
  j["observed_rate_max"] = rec.observed_rate_max;
  return j;
}

void check_identity_record(Session& s, const dl::IdentityInitRecord& rec) {
  for (std::size_t i = 0; i < rec.eigenvalues.size(); ++i)
    if (rec.predicted_beta[i] && rec.observed_rate[i] &&
        *rec.observed_rate[i] > *rec.predicted_beta[i] + 1e-9)
      s.violation("eigenvalue " + std::to_string(i) + ": observed contraction exceeds beta");
  if (rec.converged) {
    const double rho = dl::largest_singular_value(dl::product(rec.final_net));
    const double cert = dl::cor2_certificate(rec.depth, rec.step_size);
    if (rho > cert * (1.0 + 1e-9)) s.violation("converged product breaches the certificate");
  }
}

void write_identity_history(Session& s, const dl::IdentityInitRecord& rec) {
  if (s.cfg().emits("csv")) {
    auto out = s.open("history.csv");
    out << "iter,loss,product_error,max_layer_distance\n";
    for (const auto& h : rec.history)
      out << h.iter << ',' << h.loss << ',' << h.product_error << ',' << h.max_layer_distance
          << '\n';
  }
  Series err{"log10 max layer distance", {}, {}};
  for (const auto& h : rec.history) {
    err.x.push_back(static_cast<double>(h.iter));
    err.y.push_back(std::log10(std::max(h.max_layer_distance, 1e-300)));
  }
  s.plot("history.svg", {err}, "identity initialization", "iteration", "log10 distance");
}

void identity_experiment(Session& s, bool indefinite) {
  const auto& cfg = s.cfg();
  const auto n = static_cast<Eigen::Index>(cfg.integer("n"));
  const auto L = static_cast<std::size_t>(cfg.integer("L"));
  if (n > 8) throw ConfigError("parameter 'n' must be at most 8");
  std::mt19937_64 rng(seed_of(cfg));
  const double rho_max = cfg.number_or("rho_max", 3.0);
  if (!(rho_max > 0.0)) throw ConfigError("parameter 'rho_max' must be positive");
  const double eig_min = cfg.number_or("eig_min", std::min(0.25, rho_max));
  if (!(eig_min > 0.0) || eig_min > rho_max)
    throw ConfigError("parameter 'eig_min' must lie in (0, rho_max]");
  Eigen::MatrixXd R;
  if (indefinite) {
    const double neg = cfg.number_or("neg_max", 1.5);
    if (!(neg > 0.0)) throw ConfigError("parameter 'neg_max' must be positive");
    R = dl::random_indefinite(n, -neg, -std::min(0.25, neg), eig_min, rho_max, rng);
  } else {
    R = dl::random_spd(n, eig_min, rho_max, rng);
  }
  const double bound = dl::identity_init_step_bound(R, L);
  const double delta = cfg.number_or("delta", bound);
  GDConfig g = engine_config(cfg, delta, 200000);
  if (!cfg.has("grad_tol")) g.grad_tol = 1e-12;
  const auto rec = dl::run_identity_init(R, L, delta, g);

  json& r = s.report();
  r["seed"] = seed_of(cfg);
  r["bounds"] = {{"step_bound", bound},
                 {"cor2_certificate", dl::cor2_certificate(L, delta)},
                 {"spectral_norm", dl::largest_singular_value(R)}};
  r["record"] = identity_record_json(rec, R);
  r["product_spectral_norm"] = dl::largest_singular_value(dl::product(rec.final_net));
  check_identity_record(s, rec);
  write_identity_history(s, rec);
}

// ---- ReLU ------------------------------------------------------------------

void fig2(Session& s) {
  const auto& cfg = s.cfg();
  relu::Fig2Config f;
  f.seed = seed_of(cfg);
  f.width = static_cast<Eigen::Index>(cfg.integer_or("width", f.width));
  f.samples = static_cast<Eigen::Index>(cfg.integer_or("samples", f.samples));
  f.max_iters = static_cast<std::size_t>(cfg.integer_or("iters", static_cast<long long>(f.max_iters)));
  f.chunk_iters = static_cast<std::size_t>(
      cfg.integer_or("chunk_iters", static_cast<long long>(f.chunk_iters)));
  f.orbit_tol = cfg.number_or("orbit_tol", f.orbit_tol);
  f.grad_tol = cfg.number_or("grad_tol", f.grad_tol);
  f.output_weight_scale = cfg.number_or("output_weight_scale", f.output_weight_scale);
  if (f.width < 1 || f.samples < 1 || f.chunk_iters < 32 || !(f.orbit_tol > 0.0))
    throw ConfigError("fig2 parameters out of range");
  const double delta = cfg.number("delta");
  const auto rec = relu::figure2_experiment(f, delta);

  json& r = s.report();
  r["seed"] = f.seed;
  r["step_size"] = delta;
  r["bias"] = std::vector<double>(rec.bias.data(), rec.bias.data() + rec.bias.size());
  r["tail"] = tail_json(rec.tail);
  r["iterations"] = rec.iterations;
  r["final_grad_norm"] = rec.final_grad_norm;
  r["loss_odd"] = optional_json(rec.loss_odd);
  r["loss_even"] = optional_json(rec.loss_even);
  r["loss_spread"] = optional_json(rec.loss_spread);
  r["final_loss"] = rec.losses.empty() ? json(nullptr) : json(rec.losses.back());
  r["bounds"] = {{"thm4_lhs", rec.thm4.lhs},
                 {"thm4_rhs", rec.thm4.rhs},
                 {"thm4_satisfied", rec.thm4.satisfied},
                 {"thm4_argmax_index", rec.thm4.argmax_index}};
  if (rec.final_grad_norm < 1e-8 && !rec.thm4.satisfied)
    s.violation("converged run breaches max ||x|| ||f_hat(x)|| <= 1/delta");

  const bool oscillating = !rec.f_hat_odd.empty();
  if (cfg.emits("csv")) {
    auto out = s.open("f_hat.csv");
    out << (oscillating ? "x,f_target,f_hat_odd,f_hat_even\n" : "x,f_target,f_hat\n");
    for (std::size_t i = 0; i < rec.grid.size(); ++i) {
      out << rec.grid[i] << ',' << rec.f_target[i];
      if (oscillating) out << ',' << rec.f_hat_odd[i] << ',' << rec.f_hat_even[i] << '\n';
      else out << ',' << rec.f_hat[i] << '\n';
    }
    auto loss_out = s.open("losses.csv");
    loss_out << "iter,loss\n";
    for (std::size_t i = 0; i < rec.losses.size(); ++i)
      loss_out << rec.loss_iters[i] << ',' << rec.losses[i] << '\n';
  }
  std::vector<Series> curves{{"f", rec.grid, rec.f_target}};
  if (oscillating) {
    curves.push_back({"f_hat odd", rec.grid, rec.f_hat_odd});
    curves.push_back({"f_hat even", rec.grid, rec.f_hat_even});
  } else {
    curves.push_back({"f_hat", rec.grid, rec.f_hat});
  }
  s.plot("f_hat.svg", curves, "target and network output", "x", "f(x)");
}

// ---- sweep ------------------------------------------------------------------

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i)
    v[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return v;
}

void sweep(Session& s) {
  const auto& cfg = s.cfg();
  const scalar::Problem p = scalar_problem(cfg);
  const double dlo = cfg.number("delta_min"), dhi = cfg.number("delta_max");
  const double xlo = cfg.number("x0_min"), xhi = cfg.number("x0_max");
  if (dhi < dlo) throw ConfigError("parameter 'delta_max' must be >= delta_min");
  if (xhi < xlo) throw ConfigError("parameter 'x0_max' must be >= x0_min");
  const auto nd = static_cast<std::size_t>(cfg.integer_or("delta_count", 11));
  const auto nx = static_cast<std::size_t>(cfg.integer_or("x0_count", 11));
  if (nd < 1 || nx < 1) throw ConfigError("sweep counts must be positive");
  const auto deltas = linspace(dlo, dhi, nd);
  const auto x0s = linspace(xlo, xhi, nx);
  const GDConfig g = engine_config(cfg, dlo, 10000);
  const auto rows = scalar::sweep(p, deltas, x0s, g);

  json counts = json::object();
  for (auto kind : {TailKind::FixedPoint, TailKind::PeriodicOrbit, TailKind::Divergent,
                    TailKind::Undecided})
    counts[std::string(to_string(kind))] = 0;
  std::vector<Series> frac(4);
  const char* names[] = {"FixedPoint", "PeriodicOrbit", "Divergent", "Undecided"};
  for (int k = 0; k < 4; ++k) frac[k].label = names[k];
  for (std::size_t i = 0; i < nd; ++i) {
    double c[4] = {0, 0, 0, 0};
    for (std::size_t j = 0; j < nx; ++j) c[static_cast<int>(rows[i * nx + j].tail.kind)] += 1;
    for (int k = 0; k < 4; ++k) {
      frac[k].x.push_back(deltas[i]);
      frac[k].y.push_back(c[k] / static_cast<double>(nx));
    }
  }
  for (const auto& row : rows) {
    auto& c = counts[std::string(to_string(row.tail.kind))];
    c = c.get<int>() + 1;
  }
  json& r = s.report();
  r["problem"] = scalar::describe(p);
  r["cells"] = rows.size();
  r["verdict_counts"] = counts;
  if (cfg.emits("csv")) {
    auto out = s.open("sweep.csv");
    scalar::write_sweep_csv(out, rows);
  }
  s.plot("sweep.svg", frac, "tail verdicts", "step size", "fraction of starts");
}

// ---- whitened-data helpers for simulate / bounds / stability --------------

std::optional<Eigen::MatrixXd> target_from(const ExperimentConfig& cfg, json& report) {
  if (cfg.has("dataset")) {
    const auto data = load_whitened_dataset(cfg.text_or("dataset", ""));
    report["dataset"] = {{"samples", data.inputs.rows()},
                         {"input_dim", data.inputs.cols()},
                         {"output_dim", data.outputs.cols()},
                         {"whitening_error", data.whitening_error}};
    return data.R;
  }
  if (cfg.has("R")) return Eigen::MatrixXd::Constant(1, 1, cfg.number("R"));
  return std::nullopt;
}

// Balanced factorization of R = U S V^T: W_1 = S^{1/L} V^T, middle layers
// S^{1/L}, W_L = U S^{1/L}; the first layer is scaled by alpha and the last
// by 1/alpha.
dl::DeepLinearNet balanced_net(const Eigen::MatrixXd& R, std::size_t L, double alpha) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd root =
      svd.singularValues().array().pow(1.0 / static_cast<double>(L)).matrix();
  dl::DeepLinearNet net;
  if (L == 1) {
    net.layers.push_back(R);
    return net;
  }
  net.layers.push_back(alpha * root.asDiagonal() * svd.matrixV().transpose());
  for (std::size_t i = 1; i + 1 < L; ++i) net.layers.push_back(root.asDiagonal().toDenseMatrix());
  net.layers.push_back(svd.matrixU() * root.asDiagonal() / alpha);
  return net;
}

std::size_t layers_of(const ExperimentConfig& cfg) {
  const long long L = cfg.integer("L");
  if (L < 1 || L > 64) throw ConfigError("parameter 'L' must be in [1, 64]");
  return static_cast<std::size_t>(L);
}

json report_json(const dl::StabilityReport& rep) {
  json j;
  j["thm1_bound"] = rep.thm1_bound;
  j["cor1_bound"] = optional_json(rep.cor1_bound);
  j["lambda_max"] = rep.lambda_max;
  j["exact_threshold"] = rep.exact_threshold;
  j["stable"] = rep.stable;
  j["p"] = rep.p;
  j["q"] = rep.q;
  j["top_singular_tie"] = rep.top_singular_tie;
  return j;
}

template <class Fn>
RunResult guarded(const ExperimentConfig& cfg, Fn&& body) {
  Session s(cfg);
  body(s);
  return s.finish();
}

}  // namespace

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

RunResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  return guarded(cfg, [&](Session& s) {
    s.report()["experiment"] = cfg.experiment;
    const auto& e = cfg.experiment;
    if (e == "example1") example1(s);
    else if (e == "example2") example2(s);
    else if (e == "example3") example3(s);
    else if (e == "thm1-audit") thm1_audit(s);
    else if (e == "thm2") identity_experiment(s, false);
    else if (e == "thm3") identity_experiment(s, true);
    else if (e == "fig2") fig2(s);
    else if (e == "sweep") sweep(s);
  });
}

RunResult simulate(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](Session& s) {
    json& r = s.report();
    r["command"] = "simulate";
    const double delta = cfg.number("delta");
    if (!(delta > 0.0)) throw ConfigError("parameter 'delta' must be positive");
    const GDConfig g = engine_config(cfg, delta, 10000);
    if (auto R = target_from(cfg, r)) {
      const std::size_t L = layers_of(cfg);
      const std::string init = cfg.text_or("init", "identity");
      dl::DeepLinearNet net;
      if (init == "identity") {
        if (R->rows() != R->cols()) throw ConfigError("identity init needs a square target");
        net = dl::DeepLinearNet::identity(R->rows(), L);
      } else if (init == "random") {
        std::mt19937_64 rng(seed_of(cfg));
        const auto hidden = static_cast<Eigen::Index>(
            cfg.integer_or("width", std::max(R->rows(), R->cols())));
        std::vector<Eigen::Index> dims{R->cols()};
        for (std::size_t i = 1; i < L; ++i) dims.push_back(hidden);
        dims.push_back(R->rows());
        net = dl::DeepLinearNet::random(dims, cfg.number_or("init_scale", 0.5), rng);
      } else {
        throw ConfigError("parameter 'init' must be identity or random");
      }
      const auto res = dl::train(net, *R, g);
      r["target"] = matrix_json(*R);
      r["run"] = run_summary(res.trajectory);
      r["tail"] = tail_json(classify_tail(res.trajectory, g));
      r["product"] = matrix_json(dl::product(res.net));
      const double cert = dl::cor2_certificate(L, delta);
      const double rho = dl::largest_singular_value(dl::product(res.net));
      r["bounds"] = {{"cor2_certificate", cert}, {"product_spectral_norm", rho}};
      if (res.converged && L >= 2 && rho > cert * (1.0 + 1e-9))
        s.violation("converged product breaches the certificate");
      write_trajectory(s, res.trajectory, "training loss");
    } else {
      const scalar::Problem p = scalar_problem(cfg);
      const double x0 = cfg.number("x0");
      const Trajectory traj = iterate(scalar::make_dynamics(p, delta), scalar_state(x0), g);
      r["problem"] = scalar::describe(p);
      r["run"] = run_summary(traj);
      r["tail"] = tail_json(classify_tail(traj, g));
      write_trajectory(s, traj, scalar::describe(p));
    }
  });
}

RunResult bounds(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](Session& s) {
    json& r = s.report();
    r["command"] = "bounds";
    const std::size_t L = layers_of(cfg);
    json b = json::object();
    std::optional<double> rho;
    const auto R = target_from(cfg, r);
    if (R) {
      rho = dl::largest_singular_value(*R);
      r["target"] = matrix_json(*R);
    } else if (cfg.has("rho") || cfg.has("rho_max")) {
      rho = cfg.number(cfg.has("rho") ? "rho" : "rho_max");
    }
    if (rho) {
      b["spectral_norm"] = *rho;
      if (*rho > 0.0) b["cor1_bound"] = dl::cor1_bound(*rho, L);
    }
    if (cfg.has("delta") && L >= 2) {
      const double delta = cfg.number("delta");
      if (!(delta > 0.0)) throw ConfigError("parameter 'delta' must be positive");
      b["cor2_certificate"] = dl::cor2_certificate(L, delta);
    }
    if (R && R->rows() == R->cols() && (*R - R->transpose()).norm() <= dl::kSymmetryTol)
      b["identity_init_step_bound"] = dl::identity_init_step_bound(*R, L);
    if (R && rho && *rho > 0.0) {
      const auto rep = dl::thm1_bound(balanced_net(*R, L, 1.0));
      b["balanced_thm1_bound"] = rep.thm1_bound;
    }
    if (b.empty()) throw ConfigError("bounds needs one of 'rho', 'R', 'dataset' or 'delta'");
    r["bounds"] = b;
  });
}

RunResult stability(const ExperimentConfig& cfg) {
  return guarded(cfg, [&](Session& s) {
    json& r = s.report();
    r["command"] = "stability";
    const std::size_t L = layers_of(cfg);
    const double delta = cfg.number("delta");
    if (!(delta > 0.0)) throw ConfigError("parameter 'delta' must be positive");
    const auto R = target_from(cfg, r);
    if (!R) throw ConfigError("missing parameter 'R' or 'dataset'");
    const double alpha = cfg.number_or("alpha", 1.0);
    if (!(alpha > 0.0)) throw ConfigError("parameter 'alpha' must be positive");
    const auto net = balanced_net(*R, L, alpha);
    dl::StabilityOptions opts;
    opts.target = *R;
    const auto rep = dl::stability_check(net, delta, opts);
    r["target"] = matrix_json(*R);
    r["layers"] = json::array();
    for (const auto& W : net.layers) r["layers"].push_back(matrix_json(W));
    r["report"] = report_json(rep);
    if (rep.exact_threshold > rep.thm1_bound * (1.0 + 1e-12))
      s.violation("exact threshold exceeds the singular-vector bound");
  });
}

}  // namespace numlab::experiment
