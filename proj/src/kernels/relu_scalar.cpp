#include <cstring>

#include "numlab/kernels.hpp"

namespace numlab::kernels::scalar {

namespace {

// h = max(V_j x_i - b_j, 0) for every sample i.
void hidden_unit(const ReluBatch& bt, std::size_t j, double* h) {
  const double bj = bt.b[j];
  for (std::size_t i = 0; i < bt.N; ++i) h[i] = -bj;
  for (std::size_t k = 0; k < bt.n; ++k) {
    const double vjk = bt.V[k * bt.r + j];
    const double* xk = bt.X + k * bt.N;
    for (std::size_t i = 0; i < bt.N; ++i) h[i] += vjk * xk[i];
  }
  for (std::size_t i = 0; i < bt.N; ++i) h[i] = h[i] > 0.0 ? h[i] : 0.0;
}

void accumulate_outputs(const ReluBatch& bt, double* out, double* h) {
  std::memset(out, 0, sizeof(double) * bt.N * bt.m);
  for (std::size_t j = 0; j < bt.r; ++j) {
    hidden_unit(bt, j, h);
    for (std::size_t c = 0; c < bt.m; ++c) {
      const double wcj = bt.Wt[c * bt.r + j];
      double* oc = out + c * bt.N;
      for (std::size_t i = 0; i < bt.N; ++i) oc[i] += wcj * h[i];
    }
  }
}

double dot(const double* a, const double* b, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double relu_batch_grad(const ReluBatch& bt, double* dV, double* dWt, double* scratch) {
  const std::size_t N = bt.N;
  double* err = scratch;            // m x N
  double* h = scratch + bt.m * N;   // N
  double* g = h + N;                // N

  accumulate_outputs(bt, err, h);
  double loss = 0.0;
  for (std::size_t c = 0; c < bt.m; ++c) {
    double* ec = err + c * N;
    const double* yc = bt.Y + c * N;
    for (std::size_t i = 0; i < N; ++i) {
      ec[i] -= yc[i];
      loss += ec[i] * ec[i];
    }
  }

  for (std::size_t j = 0; j < bt.r; ++j) {
    hidden_unit(bt, j, h);
    for (std::size_t i = 0; i < N; ++i) g[i] = 0.0;
    for (std::size_t c = 0; c < bt.m; ++c) {
      const double* ec = err + c * N;
      dWt[c * bt.r + j] = dot(ec, h, N);
      const double wcj = bt.Wt[c * bt.r + j];
      for (std::size_t i = 0; i < N; ++i) g[i] += wcj * ec[i];
    }
    // h > 0 exactly where the unit is active.
    for (std::size_t i = 0; i < N; ++i)
      if (!(h[i] > 0.0)) g[i] = 0.0;
    for (std::size_t k = 0; k < bt.n; ++k) dV[k * bt.r + j] = dot(g, bt.X + k * N, N);
  }
  return 0.5 * loss;
}

void relu_batch_forward(const ReluBatch& bt, double* out, double* scratch) {
  accumulate_outputs(bt, out, scratch);
}

}  // namespace numlab::kernels::scalar
