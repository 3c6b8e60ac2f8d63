#include <cmath>
#include <vector>

#include "doctest.h"
#include "fbsdekit/kernels.hpp"
#include "fbsdekit/rng.hpp"

using namespace fbsdekit;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    rng::CounterRng r(seed, 0, rng::kChecker, 0);
    std::vector<double> v(n);
    for (auto& x : v) x = r.next_normal();
    return v;
}

}  // namespace

TEST_CASE("scalar kernels: known values") {
    std::vector<double> ones(100, 1.0), ramp(100);
    for (int i = 0; i < 100; ++i) ramp[i] = i + 1.0;
    const auto& k = kernels::scalar_backend();
    CHECK(k.sum(ones.data(), ones.size()) == doctest::Approx(100.0));
    CHECK(k.sum(ramp.data(), ramp.size()) == doctest::Approx(5050.0));
    CHECK(k.dot(ones.data(), ramp.data(), 100) == doctest::Approx(5050.0));
    std::vector<double> y(100, 2.0);
    k.axpy(3.0, ones.data(), y.data(), y.size());
    for (double v : y) CHECK(v == doctest::Approx(5.0));
    k.scale(0.5, ramp.data(), y.data(), y.size());
    CHECK(y[0] == doctest::Approx(0.5));
    CHECK(y[99] == doctest::Approx(50.0));
    CHECK(k.max_abs_diff(ones.data(), ramp.data(), 100) == doctest::Approx(99.0));
    CHECK(k.sum(ones.data(), 0) == 0.0);
}

TEST_CASE("active backend agrees with the scalar reference") {
    const auto& s = kernels::scalar_backend();
    const auto& a = kernels::active_backend();
    INFO("active backend: ", a.name);
    for (std::size_t n : {std::size_t(0), std::size_t(1), std::size_t(3), std::size_t(4),
                          std::size_t(7), std::size_t(8), std::size_t(33), std::size_t(1000),
                          std::size_t(1537)}) {
        auto x = random_vec(n, 11 + n);
        auto y = random_vec(n, 101 + n);
        const double tol = 1e-12 * (1.0 + double(n));
        CHECK(std::abs(s.sum(x.data(), n) - a.sum(x.data(), n)) <= tol);
        CHECK(std::abs(s.dot(x.data(), y.data(), n) - a.dot(x.data(), y.data(), n)) <= tol);
        CHECK(std::abs(s.max_abs_diff(x.data(), y.data(), n) -
                       a.max_abs_diff(x.data(), y.data(), n)) <= 0.0);
        auto y1 = y, y2 = y;
        s.axpy(0.7, x.data(), y1.data(), n);
        a.axpy(0.7, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15);
        s.scale(-1.3, x.data(), y1.data(), n);
        a.scale(-1.3, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 0.0);
    }
}

TEST_CASE("dispatch is stable within a process") {
    CHECK(std::string(kernels::active_backend().name) ==
          std::string(kernels::active_backend().name));
    CHECK(std::string(kernels::scalar_backend().name) == "scalar");
}
