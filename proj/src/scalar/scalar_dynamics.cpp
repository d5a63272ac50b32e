#include "numlab/scalar_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "numlab/errors.hpp"

namespace numlab::scalar {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

// Quartic pieces: P = x^2 + 1, Q = a^2 with a = (x-1)(x-2).
struct QuarticParts {
  double p, dp, q, dq, ddq;
};

QuarticParts quartic_parts(double x) {
  const double a = (x - 1.0) * (x - 2.0);
  const double da = 2.0 * x - 3.0;
  return {x * x + 1.0, 2.0 * x, a * a, 2.0 * a * da, 2.0 * (da * da + 2.0 * a)};
}

}  // namespace

void validate(const Problem& p) {
  std::visit(Overloaded{
                 [](const SqrtCusp&) {},
                 [](const Quartic&) {},
                 [](const Power& e) {
                   if (e.L <= 2 || e.L % 2 != 0)
                     throw InvalidArgument("power problem needs an even L > 2");
                 },
                 [](const Chain& c) {
                   if (c.L < 2) throw InvalidArgument("chain needs L >= 2");
                   if (!std::isfinite(c.lambda))
                     throw InvalidArgument("chain lambda must be finite");
                 },
             },
             p);
}

std::string describe(const Problem& p) {
  return std::visit(
      Overloaded{
          [](const SqrtCusp&) -> std::string { return "example1"; },
          [](const Quartic&) -> std::string { return "example2"; },
          [](const Power& e) { return "example3(L=" + std::to_string(e.L) + ")"; },
          [](const Chain& c) {
            return "chain(lambda=" + std::to_string(c.lambda) +
                   ",L=" + std::to_string(c.L) + ")";
          },
      },
      p);
}

double objective(const Problem& p, double x) {
  return std::visit(
      Overloaded{
          [x](const SqrtCusp&) { return 2.0 / 3.0 * std::pow(std::abs(x), 1.5); },
          [x](const Quartic&) {
            const auto q = quartic_parts(x);
            return q.p * q.q;
          },
          [x](const Power& e) { return ipow(x, e.L); },
          [x](const Chain& c) {
            const double r = ipow(x, c.L) - c.lambda;
            return 0.5 * r * r;
          },
      },
      p);
}

double derivative(const Problem& p, double x) {
  return std::visit(
      Overloaded{
          [x](const SqrtCusp&) {
            return x >= 0.0 ? std::sqrt(x) : -std::sqrt(-x);
          },
          [x](const Quartic&) {
            const auto q = quartic_parts(x);
            return q.dp * q.q + q.p * q.dq;
          },
          [x](const Power& e) { return e.L * ipow(x, e.L - 1); },
          // Derivative with respect to any single weight of the chain.
          [x](const Chain& c) { return ipow(x, c.L - 1) * (ipow(x, c.L) - c.lambda); },
      },
      p);
}

double scalar_step(const Problem& p, double x, double step_size) {
  return x - step_size * derivative(p, x);
}

double curvature_at(const Problem& p, double x) {
  return std::visit(
      Overloaded{
          [x](const SqrtCusp&) {
            return x == 0.0 ? std::numeric_limits<double>::infinity()
                            : 0.5 / std::sqrt(std::abs(x));
          },
          [x](const Quartic&) {
            const auto q = quartic_parts(x);
            return 2.0 * q.q + 2.0 * q.dp * q.dq + q.p * q.ddq;
          },
          [x](const Power& e) {
            return static_cast<double>(e.L) * (e.L - 1) * ipow(x, e.L - 2);
          },
          [x](const Chain& c) {
            const double residual = ipow(x, c.L) - c.lambda;
            return c.L * ipow(x, 2 * c.L - 2) +
                   (c.L - 1) * residual * ipow(x, c.L - 2);
          },
      },
      p);
}

Dynamics make_dynamics(const Problem& p, double step_size) {
  validate(p);
  // The chain state stands for L identical weights, so the full gradient
  // norm is sqrt(L) times the per-weight derivative.
  const double grad_scale =
      std::holds_alternative<Chain>(p) ? std::sqrt(std::get<Chain>(p).L) : 1.0;
  Dynamics dyn;
  dyn.step = [p, step_size](const State& x) {
    return scalar_state(scalar_step(p, x[0], step_size));
  };
  dyn.loss = [p](const State& x) { return objective(p, x[0]); };
  dyn.grad_norm = [p, grad_scale](const State& x, const State&) {
    return grad_scale * std::abs(derivative(p, x[0]));
  };
  return dyn;
}

double example1_orbit_amplitude(double step_size) {
  return step_size * step_size / 4.0;
}

namespace {

// All x with x - d*sqrt(x) = s (x >= 0) or x + d*sqrt(-x) = s (x < 0).
// Roots of the quadratics in t = sqrt(|x|) use the cancellation-free pair
// t1 = (d + sqrt(disc)) / 2, t2 = c / t1 where c is the constant term.
std::vector<double> example1_preimages(double s, double d) {
  std::vector<double> out;
  const double disc_pos = d * d + 4.0 * s;  // t^2 - d t - s = 0
  if (disc_pos >= 0.0) {
    const double t1 = 0.5 * (d + std::sqrt(disc_pos));
    out.push_back(t1 * t1);
    const double t2 = -s / t1;
    if (t2 >= 0.0) out.push_back(t2 * t2);
  }
  const double disc_neg = d * d - 4.0 * s;  // t^2 - d t + s = 0, x = -t^2
  if (disc_neg >= 0.0) {
    const double t1 = 0.5 * (d + std::sqrt(disc_neg));
    if (t1 > 0.0) out.push_back(-t1 * t1);
    const double t2 = s / t1;
    if (t2 > 0.0) out.push_back(-t2 * t2);
  }
  return out;
}

}  // namespace

std::vector<double> example1_basin_set(double step_size, std::size_t m) {
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  if (m == 0) throw InvalidArgument("m must be at least 1");
  std::vector<double> found{0.0};
  std::vector<double> frontier{0.0};
  auto known = [&](double x) {
    return std::any_of(found.begin(), found.end(), [x](double y) {
      return std::abs(x - y) <= 1e-15 * std::max(1.0, std::abs(y));
    });
  };
  while (found.size() < m && !frontier.empty()) {
    std::vector<double> next;
    for (double s : frontier)
      for (double x : example1_preimages(s, step_size))
        if (!known(x) &&
            std::none_of(next.begin(), next.end(), [x](double y) { return x == y; }))
          next.push_back(x);
    std::sort(next.begin(), next.end(), [](double a, double b) {
      if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
      return a > b;
    });
    for (double x : next) {
      if (found.size() == m) break;
      found.push_back(x);
    }
    frontier = std::move(next);
  }
  return found;
}

double example3_threshold(int L, double step_size) {
  validate(Power{L});
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  return std::pow(2.0 / (L * step_size), 1.0 / (L - 2));
}

ChainPrediction chain_predict(double lambda, int L, double step_size) {
  if (lambda == 0.0) throw UnsupportedLambda("lambda must be nonzero");
  if (L < 2) throw InvalidArgument("chain needs L >= 2");
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  ChainPrediction out;
  if (lambda < 0.0) {
    out.fixed_point = 0.0;
    out.delta_c = 1.0 / (1.0 - lambda);
    return out;
  }
  const double root = std::pow(lambda, 1.0 / L);
  const double lam_pow = std::pow(lambda, 2.0 * (L - 1) / L);
  out.fixed_point = root;
  if (lambda >= 1.0) {
    out.delta_c = 1.0 / (L * lam_pow);
  } else {
    out.delta_c = (1.0 - root) / (1.0 - lambda);
  }
  if (lambda > 1.0) {
    out.beta = 1.0 - step_size * (lambda - 1.0) / (root - 1.0);
  } else {
    out.beta = 1.0 - step_size * L * lam_pow;
  }
  return out;
}

std::vector<SweepRow> sweep(const Problem& p, const std::vector<double>& deltas,
                            const std::vector<double>& x0s, GDConfig cfg) {
  std::vector<SweepRow> rows;
  rows.reserve(deltas.size() * x0s.size());
  for (double delta : deltas) {
    cfg.step_size = delta;
    const Dynamics dyn = make_dynamics(p, delta);
    for (double x0 : x0s) {
      const Trajectory traj = iterate(dyn, scalar_state(x0), cfg);
      rows.push_back({delta, x0, classify_tail(traj, cfg)});
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  const auto old_precision = os.precision(17);
  os << "delta,x0,verdict,period,amplitude,limit\n";
  for (const auto& r : rows) {
    os << r.delta << ',' << r.x0 << ',' << to_string(r.tail.kind) << ',';
    if (r.tail.period) os << *r.tail.period;
    os << ',';
    if (r.tail.amplitude) os << *r.tail.amplitude;
    os << ',';
    if (r.tail.limit_state) os << (*r.tail.limit_state)[0];
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace numlab::scalar
