#include <cmath>

#include "numlab/deep_linear.hpp"
#include "numlab/errors.hpp"

namespace numlab::deep_linear {

void require_symmetric(const Matrix& R) {
  if (R.rows() != R.cols())
    throw NotSymmetric("matrix is " + std::to_string(R.rows()) + "x" +
                       std::to_string(R.cols()));
  const double asym = (R - R.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol)
    throw NotSymmetric("max |R - R^T| = " + std::to_string(asym));
}

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> symmetric_eig(const Matrix& R) {
  require_symmetric(R);
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (R + R.transpose()));
}

}  // namespace

Matrix matrix_root(const Matrix& R, std::size_t depth) {
  if (depth == 0) throw InvalidArgument("depth must be positive");
  const auto eig = symmetric_eig(R);
  Vector lam = eig.eigenvalues();
  // Round-off can push a zero eigenvalue slightly negative.
  const double floor = -1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < floor)
      throw NegativeEigenvalue("eigenvalue " + std::to_string(lam[i]));
    lam[i] = std::pow(std::max(lam[i], 0.0), 1.0 / static_cast<double>(depth));
  }
  const Matrix& U = eig.eigenvectors();
  return U * lam.asDiagonal() * U.transpose();
}

Matrix psd_projection(const Matrix& R) {
  const auto eig = symmetric_eig(R);
  const Vector lam = eig.eigenvalues().cwiseMax(0.0);
  const Matrix& U = eig.eigenvectors();
  return U * lam.asDiagonal() * U.transpose();
}

}  // namespace numlab::deep_linear
