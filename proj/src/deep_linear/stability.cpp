#include <algorithm>
#include <cmath>
#include <limits>

#include "numlab/deep_linear.hpp"
#include "numlab/errors.hpp"

namespace numlab::deep_linear {

OperatorFactors operator_factors(const DeepLinearNet& net) {
  net.validate();
  const std::size_t L = net.depth();
  std::vector<Matrix> prefix(L + 1), suffix(L + 1);
  prefix[0] = Matrix::Identity(net.input_dim(), net.input_dim());
  for (std::size_t j = 1; j <= L; ++j) prefix[j] = net.layers[j - 1] * prefix[j - 1];
  suffix[L] = Matrix::Identity(net.output_dim(), net.output_dim());
  for (std::size_t j = L; j-- > 0;) suffix[j] = suffix[j + 1] * net.layers[j];

  OperatorFactors f;
  f.A.reserve(L);
  f.B.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    f.A.push_back(suffix[i + 1] * suffix[i + 1].transpose());
    f.B.push_back(prefix[i].transpose() * prefix[i]);
  }
  return f;
}

Matrix error_operator(const DeepLinearNet& net) {
  net.validate();
  const Eigen::Index m = net.output_dim();
  const Eigen::Index n = net.input_dim();
  if (m * n > kOperatorDimCap)
    throw DimensionCapExceeded("n_L * n_0 = " + std::to_string(m * n) +
                               " exceeds " + std::to_string(kOperatorDimCap));
  const auto f = operator_factors(net);
  // vec(A E B) = (B^T kron A) vec(E) for column-major vec.
  Matrix op = Matrix::Zero(m * n, m * n);
  for (std::size_t i = 0; i < f.A.size(); ++i) {
    const Matrix& A = f.A[i];
    const Matrix& B = f.B[i];
    for (Eigen::Index bc = 0; bc < n; ++bc)
      for (Eigen::Index br = 0; br < n; ++br)
        op.block(br * m, bc * m, m, m) += B(bc, br) * A;
  }
  return op;
}

double largest_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

StabilityReport thm1_bound(const DeepLinearNet& net) {
  const Matrix rhat = product(net);
  Eigen::JacobiSVD<Matrix> svd(rhat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0)) throw ZeroProduct("end-to-end product is the zero matrix");

  StabilityReport rep;
  rep.top_singular_tie = sv.size() > 1 && sv(0) - sv(1) < 1e-9;
  const Vector u = svd.matrixU().col(0);
  const Vector v = svd.matrixV().col(0);
  const std::size_t L = net.depth();

  // p_j = ||W_j...W_1 v|| for j = 0..L; q_j = ||u^T W_L...W_j|| for j = 1..L+1.
  rep.p.resize(L + 1);
  Vector pv = v;
  rep.p[0] = pv.norm();
  for (std::size_t j = 1; j <= L; ++j) {
    pv = net.layers[j - 1] * pv;
    rep.p[j] = pv.norm();
  }
  rep.q.resize(L + 1);
  Vector qu = u;
  rep.q[L] = qu.norm();
  for (std::size_t j = L; j-- > 0;) {
    qu = net.layers[j].transpose() * qu;
    rep.q[j] = qu.norm();
  }

  // rep.q[k] holds q_{k+1}, so q_{j+1} is rep.q[j].
  double denom = 0.0;
  for (std::size_t j = 1; j <= L; ++j)
    denom += rep.p[j - 1] * rep.p[j - 1] * rep.q[j] * rep.q[j];
  rep.thm1_bound = 2.0 / denom;
  return rep;
}

double cor1_bound(double rho, std::size_t depth) {
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  if (depth == 0) throw InvalidArgument("depth must be positive");
  const double L = static_cast<double>(depth);
  return 2.0 / (L * std::pow(rho, 2.0 * (L - 1.0) / L));
}

double cor2_certificate(std::size_t depth, double step_size) {
  if (depth < 2) throw InvalidArgument("certificate needs depth >= 2");
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  const double L = static_cast<double>(depth);
  return std::pow(2.0 / (L * step_size), L / (2.0 * L - 2.0));
}

StabilityReport stability_check(const DeepLinearNet& net, double step_size,
                                const StabilityOptions& opts) {
  if (!(step_size > 0.0)) throw InvalidArgument("step size must be positive");
  if (opts.target && !opts.override_equilibrium) {
    const double gn = gradient_norm(gradient(net, *opts.target));
    if (!(gn < opts.grad_tol))
      throw InvalidArgument("net is not an equilibrium (gradient norm " +
                            std::to_string(gn) + ")");
  }
  const Matrix op = error_operator(net);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(op, Eigen::EigenvaluesOnly);

  StabilityReport rep;
  try {
    rep = thm1_bound(net);
  } catch (const ZeroProduct&) {
    rep.thm1_bound = std::numeric_limits<double>::infinity();
  }
  rep.lambda_max = std::max(0.0, eig.eigenvalues().maxCoeff());
  rep.exact_threshold = rep.lambda_max > 0.0
                            ? 2.0 / rep.lambda_max
                            : std::numeric_limits<double>::infinity();
  rep.stable = step_size * rep.lambda_max <= 2.0;
  if (opts.target) {
    const Matrix& R = *opts.target;
    if ((product(net) - R).norm() < opts.optimum_tol) {
      const double rho = largest_singular_value(R);
      if (rho > 0.0) rep.cor1_bound = cor1_bound(rho, net.depth());
    }
  }
  return rep;
}

double lemma2_lower_bound(const std::vector<Matrix>& A, const std::vector<Matrix>& B,
                          const Vector& u, const Vector& v) {
  if (A.size() != B.size()) throw ShapeMismatch("A and B lists differ in length");
  const double uu = u.squaredNorm();
  const double vv = v.squaredNorm();
  if (!(uu > 0.0) || !(vv > 0.0)) throw InvalidArgument("u and v must be nonzero");
  double sum = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (A[i].rows() != u.size() || A[i].cols() != u.size() ||
        B[i].rows() != v.size() || B[i].cols() != v.size())
      throw ShapeMismatch("factor " + std::to_string(i) + " does not match u, v");
    sum += u.dot(A[i] * u) * v.dot(B[i] * v);
  }
  return sum / (uu * vv);
}

}  // namespace numlab::deep_linear
