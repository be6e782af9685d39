#pragma once
// Dense double-precision kernels backing the network training and matching
// inner loops. Each kernel has a scalar reference implementation and, on
// x86-64, an AVX2+FMA variant selected at runtime. The scalar path is the
// semantic reference; SIMD variants are equivalence-tested against it.
//
// Matrices are row-major. Pointers must not alias unless noted.

#include <cstddef>
#include <string>

namespace viseff::kern {

namespace scalar {
double dot(const double* a, const double* b, size_t n);
double sum(const double* a, size_t n);
// y += alpha * x
void axpy(double* y, double alpha, const double* x, size_t n);
// y = W x + b, W is rows x cols row-major; b may be null (treated as zero).
void gemv(const double* W, const double* x, const double* b, double* y, size_t rows, size_t cols);
// out = W^T g  (overwrites out). W rows x cols, g length rows.
void gemv_t(const double* W, const double* g, double* out, size_t rows, size_t cols);
// W += alpha * g x^T  (rank-1 update), g length rows, x length cols.
void ger(double* W, double alpha, const double* g, const double* x, size_t rows, size_t cols);
// squared Euclidean distance
double sqdist(const double* a, const double* b, size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define VISEFF_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, size_t n);
double sum(const double* a, size_t n);
void axpy(double* y, double alpha, const double* x, size_t n);
void gemv(const double* W, const double* x, const double* b, double* y, size_t rows, size_t cols);
void gemv_t(const double* W, const double* g, double* out, size_t rows, size_t cols);
void ger(double* W, double alpha, const double* g, const double* x, size_t rows, size_t cols);
double sqdist(const double* a, const double* b, size_t n);
}  // namespace avx2
#else
#define VISEFF_HAVE_AVX2_KERNELS 0
#endif

// Dispatched entry points. The backend is chosen once per process: AVX2+FMA
// when the CPU supports it, unless VISEFF_KERNELS=scalar is set in the
// environment.
double dot(const double* a, const double* b, size_t n);
double sum(const double* a, size_t n);
void axpy(double* y, double alpha, const double* x, size_t n);
void gemv(const double* W, const double* x, const double* b, double* y, size_t rows, size_t cols);
void gemv_t(const double* W, const double* g, double* out, size_t rows, size_t cols);
void ger(double* W, double alpha, const double* g, const double* x, size_t rows, size_t cols);
double sqdist(const double* a, const double* b, size_t n);

// "avx2" or "scalar"
const std::string& active_backend();

// True when the AVX2 variants are compiled in and the CPU can run them
// (independent of the VISEFF_KERNELS override).
bool avx2_available();

}  // namespace viseff::kern
