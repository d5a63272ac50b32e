#pragma once

// One-dimensional gradient-descent maps with closed-form behaviour: the
// |x|^{3/2} cusp (period-2 orbit), the two-well quartic (step size selects the
// equilibrium), x^L (initialization-dependent divergence) and the symmetric
// scalar chain  w <- w - d * w^{L-1} (w^L - lambda).

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "numlab/core.hpp"

namespace numlab::scalar {

struct SqrtCusp {};            // f(x) = (2/3)|x|^{3/2}
struct Quartic {};             // f(x) = (x^2+1)(x-1)^2(x-2)^2
struct Power { int L = 4; };   // f(x) = x^L, L even and > 2
struct Chain {                 // 1/2 (w_L ... w_1 - lambda)^2 with all w_i equal
  double lambda = 1.0;
  int L = 2;
};

using Problem = std::variant<SqrtCusp, Quartic, Power, Chain>;

// Throws InvalidArgument when the problem parameters are out of range.
void validate(const Problem& p);
std::string describe(const Problem& p);

double objective(const Problem& p, double x);
double derivative(const Problem& p, double x);

// One gradient-descent step of the problem's map.
double scalar_step(const Problem& p, double x, double step_size);

// Hand-coded second derivative. For Chain this is the curvature along the
// symmetric direction (all weights moved together).
double curvature_at(const Problem& p, double x);

// Dynamics wrapper for the iteration engine on one-dimensional states.
Dynamics make_dynamics(const Problem& p, double step_size);

double example1_orbit_amplitude(double step_size);

// First m elements of the countable set of starting points that reach the
// origin exactly, in generation order (0, then backward preimages sorted by
// magnitude, positive before negative).
std::vector<double> example1_basin_set(double step_size, std::size_t m);

// |x0| below this converges to 0 under x^L, above it diverges.
double example3_threshold(int L, double step_size);

struct ChainPrediction {
  double delta_c = 0.0;
  std::optional<double> beta;
  double fixed_point = 0.0;
};

ChainPrediction chain_predict(double lambda, int L, double step_size);

struct SweepRow {
  double delta = 0.0;
  double x0 = 0.0;
  TailClass tail;
};

// Runs every (delta, x0) cell through the engine and classifies the tail.
std::vector<SweepRow> sweep(const Problem& p, const std::vector<double>& deltas,
                            const std::vector<double>& x0s, GDConfig cfg);

// CSV with header delta,x0,verdict,period,amplitude,limit.
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace numlab::scalar
