#pragma once

// Fixed-step iteration engine for gradient-descent maps x[k+1] = m(x[k]),
// trajectory recording, tail classification and a central-difference
// gradient oracle.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace numlab {

using State = Eigen::VectorXd;

struct GDConfig {
  double step_size = 0.1;
  std::size_t max_iters = 10000;
  double grad_tol = 1e-10;
  double divergence_norm = 1e12;
  std::size_t record_stride = 1;
  std::uint64_t seed = 0;
  std::size_t max_period = 8;
  double orbit_tol = 1e-9;

  // Throws InvalidArgument naming the first violated invariant.
  void validate() const;

  // Number of trailing states always kept at stride 1.
  std::size_t tail_window() const { return 4 * max_period; }
};

enum class StopReason { MaxIters, Converged, Diverged, NonFinite };

std::string_view to_string(StopReason r);

struct Trajectory {
  std::vector<State> states;
  std::vector<double> losses;
  std::vector<double> grad_norms;
  std::vector<std::size_t> iter_indices;
  StopReason stop = StopReason::MaxIters;

  std::size_t size() const { return states.size(); }
  const State& final_state() const { return states.back(); }
  double final_grad_norm() const { return grad_norms.back(); }
  std::size_t final_iter() const { return iter_indices.back(); }
  bool diverged() const {
    return stop == StopReason::Diverged || stop == StopReason::NonFinite;
  }

  // CSV with header iter,loss,grad_norm,state_0,...,state_{d-1}.
  void write_csv(std::ostream& os) const;
};

enum class TailKind { FixedPoint, PeriodicOrbit, Divergent, Undecided };

std::string_view to_string(TailKind k);

struct TailClass {
  TailKind kind = TailKind::Undecided;
  std::optional<std::size_t> period;
  std::optional<double> amplitude;
  std::optional<State> limit_state;
};

using StepMap = std::function<State(const State&)>;
using Objective = std::function<double(const State&)>;
// Gradient norm at x; `next` is m(x), which gradient-descent maps can use to
// avoid a second gradient evaluation.
using GradNormFn = std::function<double(const State& x, const State& next)>;

struct Dynamics {
  StepMap step;
  Objective loss;      // optional, evaluated only at recorded states
  GradNormFn grad_norm;  // optional, enables early stop on grad_tol
};

// ||x - m(x)|| / step_size, exact for x - step_size * grad f(x).
GradNormFn gd_grad_norm(double step_size);

Trajectory iterate(const Dynamics& dyn, const State& x0, const GDConfig& cfg);

inline Trajectory iterate(const StepMap& step, const State& x0,
                          const GDConfig& cfg) {
  return iterate(Dynamics{step, {}, {}}, x0, cfg);
}

TailClass classify_tail(const Trajectory& traj, const GDConfig& cfg);

// Central differences; h <= 0 selects 1e-6 * (1 + |x_i|) per coordinate.
State finite_diff_grad(const Objective& objective, const State& x,
                       double h = 0.0);

// Convenience for one-dimensional states.
inline State scalar_state(double x) { return State::Constant(1, x); }

}  // namespace numlab
