#pragma once

// Generators and reference implementations shared by the test binaries. The
// oracles here are written from the definitions, independently of src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "numlab/deep_linear.hpp"

namespace testing_support {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Matrix matrix(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * normal();
    return m;
  }
  Vector vector(Eigen::Index n, double scale = 1.0) { return matrix(n, 1, scale); }

  // Random layer widths n_0..n_L, each in [1, max_dim].
  std::vector<Eigen::Index> dims(std::size_t depth, int max_dim) {
    std::vector<Eigen::Index> d;
    for (std::size_t i = 0; i <= depth; ++i) d.push_back(integer(1, max_dim));
    return d;
  }

  numlab::deep_linear::DeepLinearNet net(const std::vector<Eigen::Index>& dims,
                                         double scale = 0.7) {
    numlab::deep_linear::DeepLinearNet n;
    for (std::size_t i = 1; i < dims.size(); ++i) n.layers.push_back(matrix(dims[i], dims[i - 1], scale));
    return n;
  }

  Matrix psd(Eigen::Index n) {
    const Matrix g = matrix(n, n);
    return g * g.transpose();
  }

 private:
  std::mt19937_64 rng_;
};

// W_L ... W_1 multiplied left to right (W_L first), the opposite association
// of the library's accumulation.
inline Matrix product_reversed(const numlab::deep_linear::DeepLinearNet& net) {
  Matrix p = net.layers.back();
  for (std::size_t i = net.layers.size() - 1; i-- > 0;) p = p * net.layers[i];
  return p;
}

// f(E) = sum_i A_i E B_i applied to each unit matrix E_k, k in column-major
// order; column k of the result is vec(f(E_k)).
inline Matrix operator_by_action(const numlab::deep_linear::DeepLinearNet& net) {
  const std::size_t L = net.layers.size();
  const Eigen::Index m = net.output_dim(), n = net.input_dim();
  // W_to ... W_from (1-based, inclusive); identity when from > to.
  auto chain = [&](std::size_t from, std::size_t to, Eigen::Index dim) {
    Matrix p = Matrix::Identity(dim, dim);
    for (std::size_t j = from; j <= to; ++j) p = net.layers[j - 1] * p;
    return p;
  };
  Matrix op(m * n, m * n);
  for (Eigen::Index k = 0; k < m * n; ++k) {
    Matrix E = Matrix::Zero(m, n);
    E(k % m, k / m) = 1.0;
    Matrix out = Matrix::Zero(m, n);
    for (std::size_t i = 1; i <= L; ++i) {
      const Matrix P = chain(1, i - 1, n);  // W_{i-1}..W_1
      Matrix S = Matrix::Identity(m, m);
      for (std::size_t j = L; j >= i + 1; --j) S = S * net.layers[j - 1];  // W_L..W_{i+1}
      out += (S * S.transpose()) * E * (P.transpose() * P);
    }
    op.col(k) = out.reshaped();
  }
  return op;
}

// Jacobian of vec(W_L...W_1) with respect to the packed parameters, by
// central differences.
inline Matrix product_jacobian_fd(const numlab::deep_linear::DeepLinearNet& net, double h = 1e-6) {
  const numlab::State x = net.pack();
  const Eigen::Index out = net.output_dim() * net.input_dim();
  Matrix J(out, x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    numlab::State xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Matrix fp = numlab::deep_linear::product(net.unpack(xp));
    const Matrix fm = numlab::deep_linear::product(net.unpack(xm));
    J.col(k) = (fp - fm).reshaped() / (2.0 * h);
  }
  return J;
}

inline double rel_err(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

}  // namespace testing_support
