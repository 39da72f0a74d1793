#include "kernels/kernel_impl.hpp"

namespace semtok::kernels::detail {

double sq_distance_scalar(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += diff * diff;
  }
  return acc;
}

Nearest nearest_scalar(const float* query, const float* centroids,
                       std::size_t k, std::size_t d) {
  Nearest best{0, sq_distance_scalar(query, centroids, d)};
  for (std::size_t c = 1; c < k; ++c) {
    const double dist = sq_distance_scalar(query, centroids + c * d, d);
    if (dist < best.sq_distance) {
      best = {static_cast<std::uint32_t>(c), dist};
    }
  }
  return best;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace semtok::kernels::detail
