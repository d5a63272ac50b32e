#include <cmath>

#include "numlab/deep_linear.hpp"
#include "numlab/errors.hpp"

namespace numlab::deep_linear {

Eigen::Index DeepLinearNet::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& w : layers) n += w.size();
  return n;
}

void DeepLinearNet::validate() const {
  if (layers.empty()) throw InvalidArgument("deep linear net needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].size() == 0)
      throw ShapeMismatch("layer " + std::to_string(i + 1) + " is empty");
    if (i > 0 && layers[i].cols() != layers[i - 1].rows())
      throw ShapeMismatch("layer " + std::to_string(i + 1) + " has " +
                          std::to_string(layers[i].cols()) + " columns, expected " +
                          std::to_string(layers[i - 1].rows()));
    if (!layers[i].allFinite())
      throw InvalidArgument("layer " + std::to_string(i + 1) + " is not finite");
  }
}

DeepLinearNet DeepLinearNet::identity(Eigen::Index n, std::size_t depth) {
  DeepLinearNet net;
  net.layers.assign(depth, Matrix::Identity(n, n));
  return net;
}

DeepLinearNet DeepLinearNet::random(const std::vector<Eigen::Index>& dims,
                                    double scale, std::mt19937_64& rng) {
  if (dims.size() < 2) throw InvalidArgument("need at least input and output dims");
  std::normal_distribution<double> normal(0.0, scale);
  DeepLinearNet net;
  for (std::size_t i = 1; i < dims.size(); ++i) {
    Matrix w(dims[i], dims[i - 1]);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = normal(rng);
    net.layers.push_back(std::move(w));
  }
  return net;
}

DeepLinearNet DeepLinearNet::scalars(const std::vector<double>& weights) {
  DeepLinearNet net;
  for (double w : weights) net.layers.push_back(Matrix::Constant(1, 1, w));
  return net;
}

State DeepLinearNet::pack() const {
  State flat(parameter_count());
  Eigen::Index off = 0;
  for (const auto& w : layers) {
    flat.segment(off, w.size()) = w.reshaped();
    off += w.size();
  }
  return flat;
}

DeepLinearNet DeepLinearNet::unpack(const State& flat) const {
  if (flat.size() != parameter_count())
    throw ShapeMismatch("flat state has " + std::to_string(flat.size()) +
                        " entries, net has " + std::to_string(parameter_count()));
  DeepLinearNet out;
  out.layers.reserve(layers.size());
  Eigen::Index off = 0;
  for (const auto& w : layers) {
    out.layers.push_back(flat.segment(off, w.size()).reshaped(w.rows(), w.cols()));
    off += w.size();
  }
  return out;
}

Matrix product(const DeepLinearNet& net) {
  net.validate();
  Matrix p = net.layers.front();
  for (std::size_t i = 1; i < net.layers.size(); ++i) p = net.layers[i] * p;
  return p;
}

namespace {

void check_target(const DeepLinearNet& net, const Matrix& target) {
  if (target.rows() != net.output_dim() || target.cols() != net.input_dim())
    throw ShapeMismatch("target is " + std::to_string(target.rows()) + "x" +
                        std::to_string(target.cols()) + ", net maps " +
                        std::to_string(net.input_dim()) + " -> " +
                        std::to_string(net.output_dim()));
}

}  // namespace

double loss(const DeepLinearNet& net, const Matrix& target) {
  const Matrix p = product(net);
  check_target(net, target);
  return 0.5 * (p - target).squaredNorm();
}

std::vector<Matrix> gradient(const DeepLinearNet& net, const Matrix& target) {
  net.validate();
  check_target(net, target);
  const std::size_t L = net.depth();
  // prefix[j] = W_j...W_1 (prefix[0] = I), suffix[j] = W_L...W_{j+1} (suffix[L] = I).
  std::vector<Matrix> prefix(L + 1), suffix(L + 1);
  prefix[0] = Matrix::Identity(net.input_dim(), net.input_dim());
  for (std::size_t j = 1; j <= L; ++j) prefix[j] = net.layers[j - 1] * prefix[j - 1];
  suffix[L] = Matrix::Identity(net.output_dim(), net.output_dim());
  for (std::size_t j = L; j-- > 0;) suffix[j] = suffix[j + 1] * net.layers[j];
  const Matrix err = prefix[L] - target;
  std::vector<Matrix> grads(L);
  for (std::size_t i = 0; i < L; ++i)
    grads[i] = suffix[i + 1].transpose() * err * prefix[i].transpose();
  return grads;
}

double gradient_norm(const std::vector<Matrix>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

DeepLinearNet gd_step(const DeepLinearNet& net, const Matrix& target,
                      double step_size) {
  const auto grads = gradient(net, target);
  DeepLinearNet next = net;
  for (std::size_t i = 0; i < grads.size(); ++i) next.layers[i] -= step_size * grads[i];
  return next;
}

Dynamics make_dynamics(const DeepLinearNet& shape, const Matrix& target,
                       double step_size) {
  shape.validate();
  check_target(shape, target);
  Dynamics dyn;
  dyn.step = [shape, target, step_size](const State& x) {
    return gd_step(shape.unpack(x), target, step_size).pack();
  };
  dyn.loss = [shape, target](const State& x) { return loss(shape.unpack(x), target); };
  dyn.grad_norm = gd_grad_norm(step_size);
  return dyn;
}

TrainResult train(const DeepLinearNet& init, const Matrix& target,
                  const GDConfig& cfg) {
  const Dynamics dyn = make_dynamics(init, target, cfg.step_size);
  TrainResult out;
  out.trajectory = iterate(dyn, init.pack(), cfg);
  const auto& traj = out.trajectory;
  out.net = init.unpack(traj.final_state());
  out.converged = traj.stop == StopReason::Converged;
  out.iterations = traj.final_iter();
  out.final_grad_norm = traj.final_grad_norm();
  out.final_loss = traj.losses.back();
  return out;
}

Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix g(n, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  // Sign-fix so the draw is Haar distributed.
  const Matrix rdiag = qr.matrixQR().diagonal().asDiagonal();
  for (Eigen::Index c = 0; c < n; ++c)
    if (rdiag(c, c) < 0.0) q.col(c) *= -1.0;
  return q;
}

Matrix random_spd(Eigen::Index n, double eig_lo, double eig_hi, std::mt19937_64& rng) {
  if (!(eig_lo > 0.0) || eig_hi < eig_lo) throw InvalidArgument("bad eigenvalue range");
  std::uniform_real_distribution<double> uni(eig_lo, eig_hi);
  const Matrix q = random_orthogonal(n, rng);
  Vector lam(n);
  for (Eigen::Index i = 0; i < n; ++i) lam[i] = uni(rng);
  Matrix r = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (r + r.transpose());
}

Matrix random_indefinite(Eigen::Index n, double neg_lo, double neg_hi, double pos_lo,
                         double pos_hi, std::mt19937_64& rng) {
  if (!(neg_hi < 0.0) || neg_lo > neg_hi || pos_hi < pos_lo)
    throw InvalidArgument("bad eigenvalue range");
  std::uniform_real_distribution<double> neg(neg_lo, neg_hi), pos(pos_lo, pos_hi);
  std::bernoulli_distribution coin(0.5);
  const Matrix q = random_orthogonal(n, rng);
  Vector lam(n);
  lam[0] = neg(rng);
  for (Eigen::Index i = 1; i < n; ++i) lam[i] = coin(rng) ? neg(rng) : pos(rng);
  Matrix r = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (r + r.transpose());
}

}  // namespace numlab::deep_linear
