#pragma once

// Gradient descent on deep linear networks W_L ... W_1 fitted to a target R
// under whitened inputs, where the loss reduces to 1/2 ||W_L...W_1 - R||_F^2.
//
// Besides the training map itself this module exposes the linearized
// error dynamics E -> sum_i A_i E B_i around an equilibrium, the
// singular-vector step-size bound derived from it, and the identity
// initialization experiments for symmetric targets.

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "numlab/core.hpp"

namespace numlab::deep_linear {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Layers are stored input-first: layers[0] is W_1 (n_1 x n_0).
struct DeepLinearNet {
  std::vector<Matrix> layers;

  std::size_t depth() const { return layers.size(); }
  Eigen::Index input_dim() const { return layers.front().cols(); }
  Eigen::Index output_dim() const { return layers.back().rows(); }
  Eigen::Index parameter_count() const;

  // Throws ShapeMismatch / InvalidArgument on a malformed net.
  void validate() const;

  static DeepLinearNet identity(Eigen::Index n, std::size_t depth);
  // Entries i.i.d. N(0, scale^2); dims = {n_0, n_1, ..., n_L}.
  static DeepLinearNet random(const std::vector<Eigen::Index>& dims, double scale,
                              std::mt19937_64& rng);
  static DeepLinearNet scalars(const std::vector<double>& weights);

  State pack() const;
  // Inverse of pack() using this net's shapes.
  DeepLinearNet unpack(const State& flat) const;
};

struct LinearTarget {
  Matrix R;
};

Matrix product(const DeepLinearNet& net);
double loss(const DeepLinearNet& net, const Matrix& target);
std::vector<Matrix> gradient(const DeepLinearNet& net, const Matrix& target);
double gradient_norm(const std::vector<Matrix>& grads);
DeepLinearNet gd_step(const DeepLinearNet& net, const Matrix& target,
                      double step_size);

// A_i = S_{i+1} S_{i+1}^T and B_i = P_{i-1}^T P_{i-1} where S_j = W_L...W_j
// and P_j = W_j...W_1 (empty products are identities).
struct OperatorFactors {
  std::vector<Matrix> A;
  std::vector<Matrix> B;
};
OperatorFactors operator_factors(const DeepLinearNet& net);

inline constexpr Eigen::Index kOperatorDimCap = 64;

// Matrix of E -> sum_i A_i E B_i acting on column-major vec(E).
Matrix error_operator(const DeepLinearNet& net);

struct StabilityReport {
  double thm1_bound = 0.0;
  std::optional<double> cor1_bound;
  double lambda_max = 0.0;
  double exact_threshold = 0.0;
  bool stable = false;
  std::vector<double> p;  // p_0 .. p_L
  std::vector<double> q;  // q_1 .. q_{L+1}
  bool top_singular_tie = false;
};

// Singular-vector bound 2 / sum_j p_{j-1}^2 q_{j+1}^2. Fills thm1_bound,
// p, q and top_singular_tie only. Throws ZeroProduct.
StabilityReport thm1_bound(const DeepLinearNet& net);

// 2 / (L rho^{2(L-1)/L})
double cor1_bound(double rho, std::size_t depth);

// (2 / (L delta))^{L / (2L - 2)}; any converged product has top singular
// value at most this.
double cor2_certificate(std::size_t depth, double step_size);

struct StabilityOptions {
  std::optional<Matrix> target;
  // Skip the equilibrium check (gradient norm below grad_tol).
  bool override_equilibrium = false;
  double grad_tol = 1e-6;
  // Product counts as a global optimum when ||product - R||_F is below this.
  double optimum_tol = 1e-6;
};

StabilityReport stability_check(const DeepLinearNet& net, double step_size,
                                const StabilityOptions& opts = {});

// Lower bound (1/(|u|^2 |v|^2)) sum_i (u^T A_i u)(v^T B_i v) on the top
// eigenvalue of E -> sum_i A_i E B_i.
double lemma2_lower_bound(const std::vector<Matrix>& A, const std::vector<Matrix>& B,
                          const Vector& u, const Vector& v);

double largest_singular_value(const Matrix& m);

// U diag(lambda^{1/L}) U^T. Throws NotSymmetric, NegativeEigenvalue.
Matrix matrix_root(const Matrix& R, std::size_t depth);
// Frobenius-nearest PSD matrix (negative eigenvalues clipped). Throws NotSymmetric.
Matrix psd_projection(const Matrix& R);

inline constexpr double kSymmetryTol = 1e-10;
void require_symmetric(const Matrix& R);

// Gradient-descent dynamics on pack()-ed states shaped like `shape`.
Dynamics make_dynamics(const DeepLinearNet& shape, const Matrix& target,
                       double step_size);

struct TrainResult {
  DeepLinearNet net;
  Trajectory trajectory;
  bool converged = false;
  std::size_t iterations = 0;
  double final_grad_norm = 0.0;
  double final_loss = 0.0;
};

TrainResult train(const DeepLinearNet& init, const Matrix& target,
                  const GDConfig& cfg);

enum class IdentityRegime { Psd, Indefinite };

// Coordinates the identity-init iteration runs in. Both are the same map up
// to an orthogonal change of basis; only rounding differs.
enum class IdentityInitBasis { Eigen, Standard };

struct IdentityInitSample {
  std::size_t iter = 0;
  double loss = 0.0;
  double product_error = 0.0;
  double max_layer_distance = 0.0;
};

struct IdentityInitRecord {
  IdentityRegime regime = IdentityRegime::Psd;
  IdentityInitBasis basis = IdentityInitBasis::Eigen;
  std::size_t depth = 0;
  double step_size = 0.0;
  double step_bound = 0.0;
  bool step_within_bound = false;
  std::size_t iterations = 0;
  bool converged = false;
  double final_grad_norm = 0.0;
  Matrix product_limit;  // R, or its PSD projection
  Matrix layer_limit;    // matrix_root(psd_projection(R), L)
  std::vector<double> final_layer_distance;
  double final_product_error = 0.0;
  bool layer_distance_monotone = true;
  std::vector<double> eigenvalues;
  // Per eigenvalue; empty optional where no contraction rate is predicted.
  std::vector<std::optional<double>> predicted_beta;
  std::vector<std::optional<double>> observed_rate;
  double observed_rate_max = 0.0;
  std::vector<IdentityInitSample> history;
  DeepLinearNet final_net;
};

// Largest step size covered by the identity-initialization guarantees:
// min{1/L, 1/(L rho^{2(L-1)/L})}, and additionally 1/(1 - lambda_min) for
// indefinite R.
double identity_init_step_bound(const Matrix& R, std::size_t depth);

// Observed per-step contraction is measured only while the eigen-component
// error is at least this large.
inline constexpr double kRateFloor = 1e-6;

// Distances, errors and rates are basis independent; final_net is always
// returned in the standard basis.
IdentityInitRecord run_identity_init(const Matrix& R, std::size_t depth,
                                     double step_size, const GDConfig& cfg,
                                     IdentityInitBasis basis = IdentityInitBasis::Eigen);

std::string_view to_string(IdentityRegime r);

// Random test targets.
Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng);
Matrix random_spd(Eigen::Index n, double eig_lo, double eig_hi, std::mt19937_64& rng);
// Symmetric with eigenvalues drawn from [neg_lo, neg_hi] (at least one) and
// [pos_lo, pos_hi].
Matrix random_indefinite(Eigen::Index n, double neg_lo, double neg_hi,
                         double pos_lo, double pos_hi, std::mt19937_64& rng);

}  // namespace numlab::deep_linear
