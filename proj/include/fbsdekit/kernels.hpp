#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Data-parallel inner loops used by the Monte-Carlo reductions, regression
// assembly and field comparisons. Scalar reference implementations always
// exist; an AVX2 variant is selected once at startup when the CPU supports
// it. Variants are equivalence-tested against each other.
namespace fbsdekit::kernels {

struct Backend {
    double (*sum)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, const double*, double*, std::size_t);
    double (*max_abs_diff)(const double*, const double*, std::size_t);
    const char* name;
};

// Scalar reference kernels (always available, used as the oracle in
// equivalence tests).
const Backend& scalar_backend();

#if defined(FBSDEKIT_HAVE_AVX2)
const Backend& avx2_backend();
#endif

// Backend chosen for this process (decided once from CPU capabilities).
const Backend& active_backend();
inline const char* active_backend_name() { return active_backend().name; }

inline double sum(const double* x, std::size_t n) { return active_backend().sum(x, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return active_backend().dot(a, b, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active_backend().axpy(a, x, y, n); }
inline void scale(double a, const double* x, double* y, std::size_t n) { active_backend().scale(a, x, y, n); }
inline double max_abs_diff(const double* a, const double* b, std::size_t n) { return active_backend().max_abs_diff(a, b, n); }

inline double sum(const std::vector<double>& x) { return sum(x.data(), x.size()); }
inline double mean(const std::vector<double>& x) { return x.empty() ? 0.0 : sum(x) / double(x.size()); }
inline double dot(const std::vector<double>& a, const std::vector<double>& b) { return dot(a.data(), b.data(), a.size()); }

}  // namespace fbsdekit::kernels
