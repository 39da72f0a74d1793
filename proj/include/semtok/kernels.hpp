#pragma once

// Inner-loop kernels with a scalar reference implementation and SIMD
// variants chosen at runtime from the host CPU features. Every variant
// accumulates in double precision; variants differ only in summation order.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace semtok::kernels {

enum class Isa { scalar, avx2 };

struct Nearest {
  std::uint32_t index;
  double sq_distance;
};

struct KernelTable {
  Isa isa;
  // Squared Euclidean distance between two float vectors.
  double (*sq_distance)(const float* a, const float* b, std::size_t n);
  // Argmin over k row-major centroids of dimension d; ties go to the lowest
  // index.
  Nearest (*nearest)(const float* query, const float* centroids, std::size_t k,
                     std::size_t d);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

bool supported(Isa isa);
const KernelTable& table(Isa isa);

// The process-wide table. Defaults to the widest supported ISA; the
// SEMTOK_ISA environment variable ("scalar" or "avx2") overrides it.
const KernelTable& active();
void select(Isa isa);

std::string_view name(Isa isa);

}  // namespace semtok::kernels
