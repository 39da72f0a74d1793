#pragma once

#include "semtok/kernels.hpp"

namespace semtok::kernels::detail {

double sq_distance_scalar(const float* a, const float* b, std::size_t n);
Nearest nearest_scalar(const float* query, const float* centroids,
                       std::size_t k, std::size_t d);
double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);

#ifdef SEMTOK_HAVE_AVX2
double sq_distance_avx2(const float* a, const float* b, std::size_t n);
Nearest nearest_avx2(const float* query, const float* centroids,
                     std::size_t k, std::size_t d);
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
#endif

}  // namespace semtok::kernels::detail
