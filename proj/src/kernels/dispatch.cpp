#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels/kernel_impl.hpp"
#include "semtok/error.hpp"

namespace semtok::kernels {

namespace {

constexpr KernelTable kScalar{Isa::scalar, detail::sq_distance_scalar,
                              detail::nearest_scalar, detail::dot_scalar,
                              detail::axpy_scalar};

#ifdef SEMTOK_HAVE_AVX2
constexpr KernelTable kAvx2{Isa::avx2, detail::sq_distance_avx2,
                            detail::nearest_avx2, detail::dot_avx2,
                            detail::axpy_avx2};
#endif

const KernelTable* initial_table() {
  if (const char* env = std::getenv("SEMTOK_ISA")) {
    const std::string requested(env);
    if (requested == "scalar") return &kScalar;
    if (requested == "avx2" && supported(Isa::avx2)) return &table(Isa::avx2);
  }
  return supported(Isa::avx2) ? &table(Isa::avx2) : &kScalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{initial_table()};
  return ptr;
}

}  // namespace

bool supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#ifdef SEMTOK_HAVE_AVX2
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw Error("kernel variant " + std::string(name(isa)) +
                " is not available on this host");
  }
#ifdef SEMTOK_HAVE_AVX2
  if (isa == Isa::avx2) return kAvx2;
#endif
  return kScalar;
}

const KernelTable& active() {
  return *current().load(std::memory_order_acquire);
}

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace semtok::kernels
