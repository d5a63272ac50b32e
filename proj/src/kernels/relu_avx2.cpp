// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "numlab/kernels.hpp"

namespace numlab::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void hidden_unit(const ReluBatch& bt, std::size_t j, double* h) {
  const std::size_t N = bt.N;
  const std::size_t N4 = N & ~std::size_t{3};
  const __m256d zero = _mm256_setzero_pd();
  const __m256d nb = _mm256_set1_pd(-bt.b[j]);
  std::size_t i = 0;
  for (; i < N4; i += 4) {
    __m256d z = nb;
    for (std::size_t k = 0; k < bt.n; ++k)
      z = _mm256_fmadd_pd(_mm256_set1_pd(bt.V[k * bt.r + j]),
                          _mm256_loadu_pd(bt.X + k * N + i), z);
    _mm256_storeu_pd(h + i, _mm256_and_pd(z, _mm256_cmp_pd(z, zero, _CMP_GT_OQ)));
  }
  for (; i < N; ++i) {
    double z = -bt.b[j];
    for (std::size_t k = 0; k < bt.n; ++k) z = std::fma(bt.V[k * bt.r + j], bt.X[k * N + i], z);
    h[i] = z > 0.0 ? z : 0.0;
  }
}

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t len) {
  const std::size_t len4 = len & ~std::size_t{3};
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i < len4; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < len; ++i) y[i] = std::fma(a, x[i], y[i]);
}

// Two accumulators hide the FMA latency.
double dot(const double* a, const double* b, std::size_t len) {
  const std::size_t len8 = len & ~std::size_t{7};
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < len8; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= len) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < len; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

void accumulate_outputs(const ReluBatch& bt, double* out, double* h) {
  std::memset(out, 0, sizeof(double) * bt.N * bt.m);
  for (std::size_t j = 0; j < bt.r; ++j) {
    hidden_unit(bt, j, h);
    for (std::size_t c = 0; c < bt.m; ++c) axpy(bt.Wt[c * bt.r + j], h, out + c * bt.N, bt.N);
  }
}

}  // namespace

double relu_batch_grad(const ReluBatch& bt, double* dV, double* dWt, double* scratch) {
  const std::size_t N = bt.N;
  const std::size_t N4 = N & ~std::size_t{3};
  double* err = scratch;
  double* h = scratch + bt.m * N;
  double* g = h + N;
  const __m256d zero = _mm256_setzero_pd();

  accumulate_outputs(bt, err, h);
  __m256d lacc = zero;
  double loss = 0.0;
  for (std::size_t c = 0; c < bt.m; ++c) {
    double* ec = err + c * N;
    const double* yc = bt.Y + c * N;
    std::size_t i = 0;
    for (; i < N4; i += 4) {
      const __m256d e = _mm256_sub_pd(_mm256_loadu_pd(ec + i), _mm256_loadu_pd(yc + i));
      _mm256_storeu_pd(ec + i, e);
      lacc = _mm256_fmadd_pd(e, e, lacc);
    }
    for (; i < N; ++i) {
      ec[i] -= yc[i];
      loss = std::fma(ec[i], ec[i], loss);
    }
  }
  loss += hsum(lacc);

  for (std::size_t j = 0; j < bt.r; ++j) {
    hidden_unit(bt, j, h);
    std::memset(g, 0, sizeof(double) * N);
    for (std::size_t c = 0; c < bt.m; ++c) {
      const double* ec = err + c * N;
      dWt[c * bt.r + j] = dot(ec, h, N);
      axpy(bt.Wt[c * bt.r + j], ec, g, N);
    }
    std::size_t i = 0;
    for (; i < N4; i += 4) {
      const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(h + i), zero, _CMP_GT_OQ);
      _mm256_storeu_pd(g + i, _mm256_and_pd(_mm256_loadu_pd(g + i), mask));
    }
    for (; i < N; ++i)
      if (!(h[i] > 0.0)) g[i] = 0.0;
    for (std::size_t k = 0; k < bt.n; ++k) dV[k * bt.r + j] = dot(g, bt.X + k * N, N);
  }
  return 0.5 * loss;
}

void relu_batch_forward(const ReluBatch& bt, double* out, double* scratch) {
  accumulate_outputs(bt, out, scratch);
}

}  // namespace numlab::kernels::avx2
