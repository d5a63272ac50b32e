#include "numlab/core.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "numlab/errors.hpp"

namespace numlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Sample {
  std::size_t iter;
  State state;
  double grad_norm;
};

}  // namespace

void GDConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw InvalidArgument("step_size must be positive and finite");
  if (max_iters == 0) throw InvalidArgument("max_iters must be positive");
  if (!(grad_tol > 0.0)) throw InvalidArgument("grad_tol must be positive");
  if (!(divergence_norm > grad_tol))
    throw InvalidArgument("grad_tol must be below divergence_norm");
  if (record_stride == 0) throw InvalidArgument("record_stride must be positive");
  if (max_period < 2) throw InvalidArgument("max_period must be at least 2");
  if (!(orbit_tol > 0.0)) throw InvalidArgument("orbit_tol must be positive");
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::MaxIters: return "MaxIters";
    case StopReason::Converged: return "Converged";
    case StopReason::Diverged: return "Diverged";
    case StopReason::NonFinite: return "NonFinite";
  }
  return "?";
}

GradNormFn gd_grad_norm(double step_size) {
  return [step_size](const State& x, const State& next) {
    return (x - next).norm() / step_size;
  };
}

Trajectory iterate(const Dynamics& dyn, const State& x0, const GDConfig& cfg) {
  cfg.validate();
  if (!dyn.step) throw InvalidArgument("step map is empty");
  if (!x0.allFinite()) throw InvalidArgument("initial state is not finite");

  const std::size_t window = cfg.tail_window();
  std::vector<Sample> strided;
  std::deque<Sample> tail;
  StopReason reason = StopReason::MaxIters;

  // The tail window doubles as the most recent strided samples; a sample is
  // copied out only when it is about to leave the window.
  auto push_tail = [&](Sample s) {
    if (tail.size() == window) {
      if (tail.front().iter % cfg.record_stride == 0)
        strided.push_back(std::move(tail.front()));
      tail.pop_front();
    }
    tail.push_back(std::move(s));
  };

  State x = x0;
  if (x.norm() >= cfg.divergence_norm) {
    push_tail({0, x, kNaN});
    reason = StopReason::Diverged;
  } else {
    for (std::size_t k = 0;; ++k) {
      State next = dyn.step(x);
      const double gn = dyn.grad_norm ? dyn.grad_norm(x, next) : kNaN;

      bool last = false;
      if (dyn.grad_norm && gn < cfg.grad_tol) {
        reason = StopReason::Converged;
        last = true;
      } else if (k == cfg.max_iters) {
        reason = StopReason::MaxIters;
        last = true;
      }

      push_tail({k, x, gn});
      if (last) break;

      if (!next.allFinite()) {
        push_tail({k + 1, std::move(next), kNaN});
        reason = StopReason::NonFinite;
        break;
      }
      if (next.norm() >= cfg.divergence_norm) {
        push_tail({k + 1, std::move(next), kNaN});
        reason = StopReason::Diverged;
        break;
      }
      x = std::move(next);
    }
  }

  Trajectory traj;
  traj.stop = reason;
  const std::size_t total = strided.size() + tail.size();
  traj.states.reserve(total);
  traj.losses.reserve(total);
  traj.grad_norms.reserve(total);
  traj.iter_indices.reserve(total);
  auto emit = [&](Sample& s) {
    double loss = kNaN;
    if (dyn.loss && s.state.allFinite()) loss = dyn.loss(s.state);
    traj.losses.push_back(loss);
    traj.grad_norms.push_back(s.grad_norm);
    traj.iter_indices.push_back(s.iter);
    traj.states.push_back(std::move(s.state));
  };
  for (auto& s : strided) emit(s);
  for (auto& s : tail) emit(s);
  return traj;
}

State finite_diff_grad(const Objective& objective, const State& x, double h) {
  State grad(x.size());
  State probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h > 0.0 ? h : 1e-6 * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + hi;
    const double fp = objective(probe);
    probe[i] = x[i] - hi;
    const double fm = objective(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NonFiniteValue("objective is not finite near coordinate " +
                           std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * hi);
  }
  return grad;
}

}  // namespace numlab
