#include "viseff/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace viseff::kern {

namespace scalar {

double dot(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum(const double* a, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

void axpy(double* y, double alpha, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* W, const double* x, const double* b, double* y, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        double acc = b ? b[r] : 0.0;
        const double* w = W + r * cols;
        for (size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
        y[r] = acc;
    }
}

void gemv_t(const double* W, const double* g, double* out, size_t rows, size_t cols) {
    std::memset(out, 0, cols * sizeof(double));
    for (size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        const double* w = W + r * cols;
        for (size_t c = 0; c < cols; ++c) out[c] += gr * w[c];
    }
}

void ger(double* W, double alpha, const double* g, const double* x, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        const double ag = alpha * g[r];
        if (ag == 0.0) continue;
        double* w = W + r * cols;
        for (size_t c = 0; c < cols; ++c) w[c] += ag * x[c];
    }
}

double sqdist(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace scalar

namespace {

bool cpu_supports_avx2() {
#if VISEFF_HAVE_AVX2_KERNELS
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct Backend {
    double (*dot)(const double*, const double*, size_t);
    double (*sum)(const double*, size_t);
    void (*axpy)(double*, double, const double*, size_t);
    void (*gemv)(const double*, const double*, const double*, double*, size_t, size_t);
    void (*gemv_t)(const double*, const double*, double*, size_t, size_t);
    void (*ger)(double*, double, const double*, const double*, size_t, size_t);
    double (*sqdist)(const double*, const double*, size_t);
    std::string name;
};

Backend make_backend() {
    Backend b{scalar::dot, scalar::sum,    scalar::axpy, scalar::gemv,
              scalar::gemv_t, scalar::ger, scalar::sqdist, "scalar"};
    const char* env = std::getenv("VISEFF_KERNELS");
    const bool forced_scalar = env && std::string(env) == "scalar";
#if VISEFF_HAVE_AVX2_KERNELS
    if (!forced_scalar && cpu_supports_avx2()) {
        b = Backend{avx2::dot, avx2::sum,    avx2::axpy, avx2::gemv,
                    avx2::gemv_t, avx2::ger, avx2::sqdist, "avx2"};
    }
#else
    (void)forced_scalar;
#endif
    return b;
}

const Backend& backend() {
    static const Backend b = make_backend();
    return b;
}

}  // namespace

double dot(const double* a, const double* b, size_t n) { return backend().dot(a, b, n); }
double sum(const double* a, size_t n) { return backend().sum(a, n); }
void axpy(double* y, double alpha, const double* x, size_t n) { backend().axpy(y, alpha, x, n); }
void gemv(const double* W, const double* x, const double* b, double* y, size_t rows, size_t cols) {
    backend().gemv(W, x, b, y, rows, cols);
}
void gemv_t(const double* W, const double* g, double* out, size_t rows, size_t cols) {
    backend().gemv_t(W, g, out, rows, cols);
}
void ger(double* W, double alpha, const double* g, const double* x, size_t rows, size_t cols) {
    backend().ger(W, alpha, g, x, rows, cols);
}
double sqdist(const double* a, const double* b, size_t n) { return backend().sqdist(a, b, n); }

const std::string& active_backend() { return backend().name; }

bool avx2_available() { return cpu_supports_avx2(); }

}  // namespace viseff::kern
