#include <atomic>
#include <cstdlib>
#include <string>

#include "numlab/kernels.hpp"

namespace numlab::kernels {

namespace {

constexpr KernelTable kScalarTable{scalar::relu_batch_grad, scalar::relu_batch_forward};
#if NUMLAB_HAVE_AVX2
constexpr KernelTable kAvx2Table{avx2::relu_batch_grad, avx2::relu_batch_forward};
#endif

bool cpu_has_avx2() {
#if NUMLAB_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return has;
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("NUMLAB_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::Scalar;
  }
  return detected_isa();
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

bool isa_available(Isa isa) {
  return isa == Isa::Scalar || cpu_has_avx2();
}

Isa detected_isa() {
  static const Isa isa = cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
  return isa;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void force_isa(std::optional<Isa> isa) {
  Isa target = isa.value_or(detected_isa());
  if (!isa_available(target)) target = Isa::Scalar;
  active().store(target, std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) {
#if NUMLAB_HAVE_AVX2
  if (isa == Isa::Avx2 && cpu_has_avx2()) return kAvx2Table;
#endif
  (void)isa;
  return kScalarTable;
}

double relu_batch_grad(const ReluBatch& batch, double* dV, double* dWt, double* scratch) {
  return table(active_isa()).batch_grad(batch, dV, dWt, scratch);
}

void relu_batch_forward(const ReluBatch& batch, double* out, double* scratch) {
  table(active_isa()).batch_forward(batch, out, scratch);
}

}  // namespace numlab::kernels
