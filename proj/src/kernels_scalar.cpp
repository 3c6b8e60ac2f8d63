#include "fbsdekit/kernels.hpp"

#include <cmath>

namespace fbsdekit::kernels {
namespace {

// Blocked summation with 4 accumulators; matches the lane structure of the
// SIMD variants closely enough that cross-variant differences stay at
// rounding level.
double sum_scalar(const double* x, std::size_t n) {
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += x[i];
        a1 += x[i + 1];
        a2 += x[i + 2];
        a3 += x[i + 3];
    }
    double tail = 0;
    for (; i < n; ++i) tail += x[i];
    return (a0 + a2) + (a1 + a3) + tail;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += a[i] * b[i];
        a1 += a[i + 1] * b[i + 1];
        a2 += a[i + 2] * b[i + 2];
        a3 += a[i + 3] * b[i + 3];
    }
    double tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return (a0 + a2) + (a1 + a3) + tail;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

double max_abs_diff_scalar(const double* a, const double* b, std::size_t n) {
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

const Backend kScalar{sum_scalar, dot_scalar, axpy_scalar, scale_scalar, max_abs_diff_scalar, "scalar"};

}  // namespace

const Backend& scalar_backend() { return kScalar; }

}  // namespace fbsdekit::kernels
