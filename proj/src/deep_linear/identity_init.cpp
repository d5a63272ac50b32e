#include <algorithm>
#include <cmath>

#include "numlab/deep_linear.hpp"
#include "numlab/errors.hpp"
#include "numlab/scalar_dynamics.hpp"

namespace numlab::deep_linear {

std::string_view to_string(IdentityRegime r) {
  return r == IdentityRegime::Psd ? "psd" : "indefinite";
}

double identity_init_step_bound(const Matrix& R, std::size_t depth) {
  require_symmetric(R);
  if (depth == 0) throw InvalidArgument("depth must be positive");
  const double L = static_cast<double>(depth);
  double bound = 1.0 / L;
  const double rho = largest_singular_value(R);
  if (rho > 0.0) bound = std::min(bound, 0.5 * cor1_bound(rho, depth));
  const double lam_min =
      Eigen::SelfAdjointEigenSolver<Matrix>(R, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (lam_min < 0.0) bound = std::min(bound, 1.0 / (1.0 - lam_min));
  return bound;
}

namespace {

// Largest |u_k^T W u_k - target_k| over the layers, per eigenvector u_k.
Vector component_errors(const DeepLinearNet& net, const Matrix& U,
                        const Vector& targets) {
  Vector err = Vector::Zero(targets.size());
  for (const auto& w : net.layers)
    for (Eigen::Index k = 0; k < targets.size(); ++k)
      err[k] = std::max(err[k], std::abs(U.col(k).dot(w * U.col(k)) - targets[k]));
  return err;
}

std::vector<double> layer_distances(const DeepLinearNet& net, const Matrix& limit) {
  std::vector<double> d;
  d.reserve(net.depth());
  for (const auto& w : net.layers) d.push_back((w - limit).norm());
  return d;
}

}  // namespace

IdentityInitRecord run_identity_init(const Matrix& R, std::size_t depth,
                                     double step_size, const GDConfig& cfg_in,
                                     IdentityInitBasis basis) {
  GDConfig cfg = cfg_in;
  cfg.step_size = step_size;
  cfg.validate();
  require_symmetric(R);
  if (depth == 0) throw InvalidArgument("depth must be positive");
  const Matrix Rs = 0.5 * (R + R.transpose());
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(Rs);
  const Vector lam = eig.eigenvalues();
  const Eigen::Index n = Rs.rows();

  IdentityInitRecord rec;
  rec.depth = depth;
  rec.step_size = step_size;
  rec.basis = basis;
  rec.regime = lam(0) < 0.0 ? IdentityRegime::Indefinite : IdentityRegime::Psd;
  rec.step_bound = identity_init_step_bound(Rs, depth);
  rec.step_within_bound = step_size <= rec.step_bound;
  const Matrix projected = psd_projection(Rs);
  rec.product_limit = rec.regime == IdentityRegime::Psd ? Rs : projected;
  rec.layer_limit = matrix_root(projected, depth);

  // Identity init commutes with conjugation by R's eigenvectors, so in the
  // eigenbasis every iterate is diagonal and off-diagonals stay exactly zero.
  // In the standard basis rounding can seed the saddle at W = 0 when R has
  // negative eigenvalues.
  const bool eigen = basis == IdentityInitBasis::Eigen;
  const Matrix U = eigen ? Matrix(Matrix::Identity(n, n)) : eig.eigenvectors();
  const Matrix target = eigen ? Matrix(lam.asDiagonal()) : Rs;
  const Matrix product_limit =
      eigen ? Matrix(lam.cwiseMax(0.0).asDiagonal()) : rec.product_limit;
  Vector comp_target(n);
  rec.eigenvalues.assign(lam.data(), lam.data() + n);
  rec.predicted_beta.resize(n);
  rec.observed_rate.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    comp_target[k] = lam[k] > 0.0 ? std::pow(lam[k], 1.0 / static_cast<double>(depth)) : 0.0;
    // A single layer is plain least squares; no chain contraction to predict.
    if (lam[k] > 0.0 && depth >= 2)
      rec.predicted_beta[k] =
          scalar::chain_predict(lam[k], static_cast<int>(depth), step_size).beta;
  }
  const Matrix layer_limit = eigen ? Matrix(comp_target.asDiagonal()) : rec.layer_limit;

  DeepLinearNet net = DeepLinearNet::identity(n, depth);
  Vector comp_err = component_errors(net, U, comp_target);
  std::vector<double> dist = layer_distances(net, layer_limit);

  for (std::size_t k = 0;; ++k) {
    const auto grads = gradient(net, target);
    const double gn = gradient_norm(grads);
    const bool last = gn < cfg.grad_tol || k == cfg.max_iters || !std::isfinite(gn);
    if (k % cfg.record_stride == 0 || last) {
      rec.history.push_back({k, loss(net, target), (product(net) - product_limit).norm(),
                             *std::max_element(dist.begin(), dist.end())});
    }
    if (last) {
      rec.iterations = k;
      rec.converged = gn < cfg.grad_tol;
      rec.final_grad_norm = gn;
      break;
    }
    for (std::size_t i = 0; i < grads.size(); ++i) net.layers[i] -= step_size * grads[i];

    const Vector next_err = component_errors(net, U, comp_target);
    for (Eigen::Index c = 0; c < n; ++c) {
      if (!rec.predicted_beta[c] || comp_err[c] < kRateFloor) continue;
      const double ratio = next_err[c] / comp_err[c];
      rec.observed_rate[c] = std::max(rec.observed_rate[c].value_or(0.0), ratio);
    }
    comp_err = next_err;

    const auto next_dist = layer_distances(net, layer_limit);
    for (std::size_t i = 0; i < dist.size(); ++i)
      if (next_dist[i] > dist[i] * (1.0 + 1e-12) + 1e-15) rec.layer_distance_monotone = false;
    dist = next_dist;
  }

  rec.final_layer_distance = dist;
  rec.final_product_error = (product(net) - product_limit).norm();
  for (const auto& r : rec.observed_rate)
    if (r) rec.observed_rate_max = std::max(rec.observed_rate_max, *r);
  if (eigen) {
    const Matrix& V = eig.eigenvectors();
    for (auto& w : net.layers) w = V * w * V.transpose();
  }
  rec.final_net = std::move(net);
  return rec;
}

}  // namespace numlab::deep_linear
