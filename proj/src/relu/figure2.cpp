#include <algorithm>
#include <cmath>

#include "numlab/errors.hpp"
#include "numlab/relu_two_layer.hpp"

namespace numlab::relu {

double PiecewiseTarget::operator()(double x) const {
  std::size_t k = 0;
  while (k < breaks.size() && x >= breaks[k]) ++k;
  return slopes[k] * x + intercepts[k];
}

void PiecewiseTarget::validate() const {
  if (slopes.size() != breaks.size() + 1 || intercepts.size() != slopes.size())
    throw InvalidArgument("piecewise target needs one more piece than breaks");
  if (!std::is_sorted(breaks.begin(), breaks.end()))
    throw InvalidArgument("piecewise target breaks must be increasing");
}

PiecewiseTarget PiecewiseTarget::step_plus_ramp() {
  return PiecewiseTarget{{0.3, 0.65}, {1.0, -3.0, 1.5}, {0.5, 2.0, -0.5}};
}

ReluDataset figure2_dataset(const Fig2Config& cfg) {
  cfg.target.validate();
  if (cfg.samples < 1) throw InvalidArgument("need at least one sample");
  ReluDataset data;
  data.inputs.resize(cfg.samples, 1);
  data.targets.resize(cfg.samples, 1);
  const double N = static_cast<double>(cfg.samples);
  for (Eigen::Index i = 0; i < cfg.samples; ++i) {
    const double x = static_cast<double>(i + 1) / N;
    data.inputs(i, 0) = x;
    data.targets(i, 0) = cfg.target(x);
  }
  return data;
}

ReluTwoLayerNet figure2_init(const Fig2Config& cfg) {
  if (cfg.width < 1) throw InvalidArgument("width must be positive");
  std::mt19937_64 rng(cfg.seed);
  ReluTwoLayerNet net = ReluTwoLayerNet::random_normal(1, cfg.width, 1, rng);
  net.W() *= cfg.output_weight_scale;
  return net;
}

namespace {

std::vector<double> column(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.rows());
}

}  // namespace

Fig2Record figure2_experiment(const Fig2Config& cfg, double step_size) {
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  const ReluDataset data = figure2_dataset(cfg);
  const ReluTwoLayerNet init = figure2_init(cfg);

  GDConfig gcfg;
  gcfg.step_size = step_size;
  gcfg.max_iters = cfg.chunk_iters;
  gcfg.grad_tol = cfg.grad_tol;
  gcfg.orbit_tol = cfg.orbit_tol;
  gcfg.record_stride = cfg.record_stride;
  gcfg.seed = cfg.seed;
  const Dynamics dyn = make_dynamics(init, data, step_size);

  Fig2Record rec;
  rec.step_size = step_size;
  rec.bias = init.b();
  rec.grid = column(data.inputs);
  rec.f_target = column(data.targets);

  State state = init.pack();
  std::size_t offset = 0;
  Trajectory traj;
  for (;;) {
    traj = iterate(dyn, state, gcfg);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      if (offset > 0 && traj.iter_indices[i] == 0) continue;  // chunk seam
      rec.loss_iters.push_back(offset + traj.iter_indices[i]);
      rec.losses.push_back(traj.losses[i]);
    }
    offset += traj.final_iter();
    rec.tail = classify_tail(traj, gcfg);
    if (rec.tail.kind != TailKind::Undecided || traj.stop != StopReason::MaxIters ||
        offset >= cfg.max_iters)
      break;
    state = traj.final_state();
  }
  rec.iterations = offset;
  rec.final_grad_norm = traj.final_grad_norm();

  const ReluTwoLayerNet final_net = init.with_state(traj.final_state());
  rec.f_hat = column(forward_batch(final_net, data.inputs));
  if (rec.tail.kind == TailKind::PeriodicOrbit && rec.tail.period == 2) {
    const std::size_t last = traj.size() - 1;
    const bool last_even = (offset % 2) == 0;
    const std::size_t even_idx = last_even ? last : last - 1;
    const std::size_t odd_idx = last_even ? last - 1 : last;
    rec.f_hat_even = column(forward_batch(init.with_state(traj.states[even_idx]), data.inputs));
    rec.f_hat_odd = column(forward_batch(init.with_state(traj.states[odd_idx]), data.inputs));
    rec.loss_even = traj.losses[even_idx];
    rec.loss_odd = traj.losses[odd_idx];
    const std::size_t window = gcfg.tail_window();
    double spread = 0.0;
    for (std::size_t i = traj.size() - window + 2; i < traj.size(); ++i)
      spread = std::max(spread, std::abs(traj.losses[i] - traj.losses[i - 2]));
    rec.loss_spread = spread;
  }
  if (rec.tail.kind != TailKind::Divergent) rec.thm4 = thm4_check(final_net, data, step_size);
  return rec;
}

TransitionSearch find_fixed_to_orbit_transition(const Fig2Config& cfg, double lo,
                                                double hi, std::size_t grid_points,
                                                std::size_t max_bisections) {
  if (!(lo > 0.0) || !(hi > lo)) throw InvalidArgument("need 0 < lo < hi");
  if (grid_points < 2) throw InvalidArgument("need at least two grid points");
  TransitionSearch out;
  auto probe = [&](double delta) {
    Fig2Record rec = figure2_experiment(cfg, delta);
    out.probes.emplace_back(delta, rec.tail);
    return rec;
  };
  auto is_period2 = [](const Fig2Record& r) {
    return r.tail.kind == TailKind::PeriodicOrbit && r.tail.period == 2;
  };

  std::optional<Fig2Record> fixed;
  std::optional<double> above;
  const double log_lo = std::log(lo);
  const double log_step = (std::log(hi) - log_lo) / static_cast<double>(grid_points - 1);
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double delta = std::exp(log_lo + log_step * static_cast<double>(g));
    Fig2Record rec = probe(delta);
    if (rec.tail.kind == TailKind::FixedPoint) {
      fixed = std::move(rec);
      continue;
    }
    if (!fixed) return out;  // lower end already fails to converge
    if (is_period2(rec)) {
      out.fixed = std::move(fixed);
      out.periodic = std::move(rec);
      return out;
    }
    above = delta;
    break;
  }
  if (!fixed || !above) return out;

  double a = fixed->step_size;
  double b = *above;
  for (std::size_t it = 0; it < max_bisections; ++it) {
    const double mid = std::sqrt(a * b);
    Fig2Record rec = probe(mid);
    if (rec.tail.kind == TailKind::FixedPoint) {
      a = mid;
      fixed = std::move(rec);
    } else if (is_period2(rec)) {
      out.fixed = std::move(fixed);
      out.periodic = std::move(rec);
      return out;
    } else {
      b = mid;
    }
  }
  return out;
}

}  // namespace numlab::relu
