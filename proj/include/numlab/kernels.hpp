#pragma once

// Batch kernels for the two-layer ReLU network W g(V x - b).
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2+FMA
// variant. The variant is picked once at runtime from CPUID; set
// NUMLAB_ISA=scalar in the environment (or call force_isa) to pin the
// reference path. The variants agree to rounding, not bit for bit, since FMA
// contracts multiply-adds.

#include <cstddef>
#include <optional>
#include <string_view>

namespace numlab::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

// Best ISA this CPU and build support.
Isa detected_isa();
// ISA used by the dispatching entry points below.
Isa active_isa();
// Pins the dispatch target; nullopt restores detection. Requesting an ISA the
// CPU lacks falls back to Scalar.
void force_isa(std::optional<Isa> isa);
bool isa_available(Isa isa);

// All operands are column-major with the sample index as the fast axis of
// X, Y and the outputs, so the inner loops stream over samples.
struct ReluBatch {
  std::size_t n = 0;  // input dim
  std::size_t r = 0;  // hidden units
  std::size_t m = 0;  // output dim
  std::size_t N = 0;  // samples
  const double* X = nullptr;   // N x n, feature k at X + k*N
  const double* Y = nullptr;   // N x m, output c at Y + c*N
  const double* V = nullptr;   // r x n, V(j, k) at V[k*r + j]
  const double* b = nullptr;   // r
  const double* Wt = nullptr;  // r x m (W transposed), W(c, j) at Wt[c*r + j]
};

inline constexpr std::size_t scratch_size(std::size_t N, std::size_t m) {
  return (m + 2) * N;
}

// Overwrites dV (r x n) and dWt (r x m) with the full-batch gradients of
// 1/2 sum_i ||W g(V x_i - b) - y_i||^2 and returns that loss. A unit is
// active iff V x - b > 0 strictly.
using BatchGradFn = double (*)(const ReluBatch& batch, double* dV, double* dWt,
                               double* scratch);
// Writes W g(V x_i - b) for every sample into out (N x m, column-major).
using BatchForwardFn = void (*)(const ReluBatch& batch, double* out, double* scratch);

struct KernelTable {
  BatchGradFn batch_grad;
  BatchForwardFn batch_forward;
};

const KernelTable& table(Isa isa);

double relu_batch_grad(const ReluBatch& batch, double* dV, double* dWt, double* scratch);
void relu_batch_forward(const ReluBatch& batch, double* out, double* scratch);

namespace scalar {
double relu_batch_grad(const ReluBatch& batch, double* dV, double* dWt, double* scratch);
void relu_batch_forward(const ReluBatch& batch, double* out, double* scratch);
}  // namespace scalar

namespace avx2 {
double relu_batch_grad(const ReluBatch& batch, double* dV, double* dWt, double* scratch);
void relu_batch_forward(const ReluBatch& batch, double* out, double* scratch);
}  // namespace avx2

}  // namespace numlab::kernels
