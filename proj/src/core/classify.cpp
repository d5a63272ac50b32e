#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "numlab/core.hpp"
#include "numlab/errors.hpp"

namespace numlab {

std::string_view to_string(TailKind k) {
  switch (k) {
    case TailKind::FixedPoint: return "FixedPoint";
    case TailKind::PeriodicOrbit: return "PeriodicOrbit";
    case TailKind::Divergent: return "Divergent";
    case TailKind::Undecided: return "Undecided";
  }
  return "?";
}

namespace {

// Largest ||t[i] - t[i - lag]|| over the window.
double max_lag_distance(const std::vector<State>& states, std::size_t begin,
                        std::size_t lag) {
  double worst = 0.0;
  for (std::size_t i = begin + lag; i < states.size(); ++i)
    worst = std::max(worst, (states[i] - states[i - lag]).norm());
  return worst;
}

}  // namespace

TailClass classify_tail(const Trajectory& traj, const GDConfig& cfg) {
  TailClass out;
  if (traj.size() == 0) throw InsufficientTail("empty trajectory");
  if (traj.diverged()) {
    out.kind = TailKind::Divergent;
    return out;
  }
  if (traj.stop == StopReason::Converged) {
    out.kind = TailKind::FixedPoint;
    out.limit_state = traj.final_state();
    return out;
  }

  const auto& idx = traj.iter_indices;
  std::size_t run = 1;
  for (std::size_t i = idx.size() - 1; i > 0 && idx[i] == idx[i - 1] + 1; --i)
    ++run;
  const std::size_t window = cfg.tail_window();
  if (run < window)
    throw InsufficientTail("stride-1 tail has " + std::to_string(run) +
                           " states, need " + std::to_string(window));
  const std::size_t begin = traj.size() - window;

  if (max_lag_distance(traj.states, begin, 1) < cfg.orbit_tol) {
    out.kind = TailKind::FixedPoint;
    out.limit_state = traj.final_state();
    return out;
  }

  for (std::size_t p = 2; p <= cfg.max_period; ++p) {
    if (max_lag_distance(traj.states, begin, p) >= cfg.orbit_tol) continue;
    double diameter = 0.0;
    const std::size_t last = traj.size();
    for (std::size_t i = last - p; i < last; ++i)
      for (std::size_t j = i + 1; j < last; ++j)
        diameter = std::max(diameter, (traj.states[i] - traj.states[j]).norm());
    const double amplitude = 0.5 * diameter;
    if (amplitude > cfg.orbit_tol) {
      out.kind = TailKind::PeriodicOrbit;
      out.period = p;
      out.amplitude = amplitude;
      return out;
    }
    break;
  }

  if (traj.final_state().norm() >= cfg.divergence_norm) {
    out.kind = TailKind::Divergent;
    return out;
  }
  out.kind = TailKind::Undecided;
  return out;
}

void Trajectory::write_csv(std::ostream& os) const {
  const Eigen::Index dim = states.empty() ? 0 : states.front().size();
  os << "iter,loss,grad_norm";
  for (Eigen::Index d = 0; d < dim; ++d) os << ",state_" << d;
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t i = 0; i < states.size(); ++i) {
    os << iter_indices[i] << ',' << losses[i] << ',' << grad_norms[i];
    for (Eigen::Index d = 0; d < states[i].size(); ++d) os << ',' << states[i][d];
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace numlab
