#pragma once

// Two-layer ReLU network x -> W g(V x - b) with a frozen bias b, trained by
// full-batch gradient descent on 1/2 sum_i ||W g(V x_i - b) - f(x_i)||^2.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "numlab/core.hpp"

namespace numlab::relu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ReluTwoLayerNet {
 public:
  ReluTwoLayerNet(Matrix W, Matrix V, Vector b);

  // W, V, b entries i.i.d. standard normal.
  static ReluTwoLayerNet random_normal(Eigen::Index n, Eigen::Index r, Eigen::Index m,
                                       std::mt19937_64& rng);

  Eigen::Index input_dim() const { return V_.cols(); }
  Eigen::Index hidden_dim() const { return V_.rows(); }
  Eigen::Index output_dim() const { return W_.rows(); }

  const Matrix& W() const { return W_; }
  const Matrix& V() const { return V_; }
  const Vector& b() const { return b_; }
  Matrix& W() { return W_; }
  Matrix& V() { return V_; }

  // [vec(W); vec(V)]; b is not part of the trainable state.
  State pack() const;
  ReluTwoLayerNet with_state(const State& flat) const;

 private:
  Matrix W_;  // m x r
  Matrix V_;  // r x n
  Vector b_;  // r, frozen
};

// One sample per row; column-major storage keeps each feature contiguous.
struct ReluDataset {
  Matrix inputs;   // N x n
  Matrix targets;  // N x m

  Eigen::Index size() const { return inputs.rows(); }
  void validate() const;
};

Vector forward(const ReluTwoLayerNet& net, const Vector& x);
// Network outputs for every sample (N x m).
Matrix forward_batch(const ReluTwoLayerNet& net, const Matrix& inputs);

struct Gradients {
  Matrix dW;
  Matrix dV;
  double loss = 0.0;
};

Gradients grads(const ReluTwoLayerNet& net, const ReluDataset& data);
ReluTwoLayerNet gd_step(const ReluTwoLayerNet& net, const ReluDataset& data,
                        double step_size);

struct Thm4Report {
  double lhs = 0.0;  // max_i ||x_i|| ||f_hat(x_i)||
  double rhs = 0.0;  // 1 / delta
  bool satisfied = false;
  std::size_t argmax_index = 0;
};

Thm4Report thm4_check(const ReluTwoLayerNet& net, const ReluDataset& data,
                      double step_size);

Dynamics make_dynamics(const ReluTwoLayerNet& shape, const ReluDataset& data,
                       double step_size);

struct TrainResult {
  ReluTwoLayerNet net;
  Trajectory trajectory;
  bool converged = false;
  std::size_t iterations = 0;
  double final_grad_norm = 0.0;
};

TrainResult train(const ReluTwoLayerNet& init, const ReluDataset& data,
                  const GDConfig& cfg);

// Piecewise-linear target on [0, 1]: piece k covers [breaks[k-1], breaks[k])
// and evaluates slopes[k] * x + intercepts[k].
struct PiecewiseTarget {
  std::vector<double> breaks;
  std::vector<double> slopes;
  std::vector<double> intercepts;

  double operator()(double x) const;
  void validate() const;
  // Step-plus-ramp with jumps at 0.3 and 0.65.
  static PiecewiseTarget step_plus_ramp();
};

struct Fig2Config {
  std::uint64_t seed = 1;
  Eigen::Index width = 20;
  Eigen::Index samples = 1000;
  // Multiplies the drawn output weights; 0 starts from W = 0.
  double output_weight_scale = 1.0;
  PiecewiseTarget target = PiecewiseTarget::step_plus_ramp();
  // The run is classified every `chunk_iters` steps and stops at the first
  // FixedPoint / PeriodicOrbit / Divergent verdict or after max_iters.
  std::size_t chunk_iters = 50000;
  std::size_t max_iters = 400000;
  // The loss keeps creeping down along near-flat directions long after the
  // fast modes settle (per-step drift around 1e-5), so a 1e-9 tolerance never
  // reaches a verdict. 1e-4 is about 1e-5 of the parameter norm.
  double orbit_tol = 1e-4;
  double grad_tol = 1e-10;
  std::size_t record_stride = 1000;
};

ReluDataset figure2_dataset(const Fig2Config& cfg);
// Initial net drawn from the seed; identical for every step size.
ReluTwoLayerNet figure2_init(const Fig2Config& cfg);

struct Fig2Record {
  double step_size = 0.0;
  TailClass tail;
  std::size_t iterations = 0;
  double final_grad_norm = 0.0;
  Vector bias;
  std::vector<double> grid;
  std::vector<double> f_target;
  std::vector<double> f_hat;       // FixedPoint / other: final iterate
  std::vector<double> f_hat_odd;   // PeriodicOrbit(2) only
  std::vector<double> f_hat_even;  // PeriodicOrbit(2) only
  std::optional<double> loss_odd;
  std::optional<double> loss_even;
  // Spread of the even / odd loss values over the classification window.
  std::optional<double> loss_spread;
  std::vector<std::size_t> loss_iters;
  std::vector<double> losses;
  Thm4Report thm4;
};

Fig2Record figure2_experiment(const Fig2Config& cfg, double step_size);

struct TransitionSearch {
  std::optional<Fig2Record> fixed;     // at delta_lo
  std::optional<Fig2Record> periodic;  // at delta_hi
  // Every step size tried, in order, with its verdict.
  std::vector<std::pair<double, TailClass>> probes;
  bool found() const { return fixed.has_value() && periodic.has_value(); }
};

// Scans a log-spaced grid over [lo, hi] and bisects between the last
// FixedPoint and the first non-FixedPoint step size until it lands on a
// period-2 orbit.
TransitionSearch find_fixed_to_orbit_transition(const Fig2Config& cfg, double lo,
                                                double hi, std::size_t grid_points = 7,
                                                std::size_t max_bisections = 8);

}  // namespace numlab::relu
