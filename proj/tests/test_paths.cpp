#include <cmath>
#include <vector>

#include "doctest.h"
#include "fbsdekit/paths.hpp"
#include "fbsdekit/presets.hpp"

using namespace fbsdekit;

namespace {

double terminal_mean(const std::vector<double>& X, int path_count, int n_steps) {
    double m = 0;
    for (int p = 0; p < path_count; ++p) m += X[std::size_t(p) * (n_steps + 1) + n_steps];
    return m / path_count;
}

}  // namespace

TEST_CASE("noise sampling is a pure function of (grid, law, count, seed)") {
    auto grid = paths::TimeGrid::uniform(0, 1, 16);
    const auto& levy = presets::get("pure-jump").levy;
    auto n1 = paths::sample_noise(grid, levy, 1, 500, 99);
    auto n2 = paths::sample_noise(grid, levy, 1, 500, 99);
    CHECK(n1.dB == n2.dB);
    REQUIRE(n1.jumps.size() == n2.jumps.size());
    for (std::size_t p = 0; p < n1.jumps.size(); ++p) {
        REQUIRE(n1.jumps[p].size() == n2.jumps[p].size());
        for (std::size_t i = 0; i < n1.jumps[p].size(); ++i) {
            CHECK(n1.jumps[p][i].time == n2.jumps[p][i].time);
            CHECK(n1.jumps[p][i].step == n2.jumps[p][i].step);
            CHECK(n1.jumps[p][i].mark == n2.jumps[p][i].mark);
        }
    }
    auto n3 = paths::sample_noise(grid, levy, 1, 500, 100);
    CHECK(n1.dB != n3.dB);
}

TEST_CASE("path subsets are stable under the path count") {
    auto grid = paths::TimeGrid::uniform(0, 1, 8);
    auto small = paths::sample_noise(grid, model::LevyMeasure::none(), 1, 10, 5);
    auto big = paths::sample_noise(grid, model::LevyMeasure::none(), 1, 1000, 5);
    for (int p = 0; p < 10; ++p)
        for (int k = 0; k < 8; ++k) CHECK(small.brownian(p, k, 0) == big.brownian(p, k, 0));
}

TEST_CASE("no jumps are produced when the intensity vanishes") {
    auto grid = paths::TimeGrid::uniform(0, 1, 8);
    auto noise = paths::sample_noise(grid, model::LevyMeasure::none(), 1, 200, 1);
    for (const auto& evs : noise.jumps) CHECK(evs.empty());
}

TEST_CASE("brownian increments have the right first two moments") {
    auto grid = paths::TimeGrid::uniform(0, 1, 32);
    const int P = 4000;
    auto noise = paths::sample_noise(grid, model::LevyMeasure::none(), 1, P, 2024);
    double mean = 0, var = 0;
    const std::size_t N = noise.dB.size();
    for (double v : noise.dB) mean += v;
    mean /= double(N);
    for (double v : noise.dB) var += (v - mean) * (v - mean);
    var /= double(N - 1);
    CHECK(std::abs(mean) <= 5 * std::sqrt(grid.dt / double(N)));
    CHECK(std::abs(var - grid.dt) <= 5 * grid.dt * std::sqrt(2.0 / double(N - 1)));
}

TEST_CASE("jump counts follow the Poisson law") {
    auto grid = paths::TimeGrid::uniform(0, 2, 16);
    const auto& levy = presets::get("pure-jump").levy;  // intensity 3
    const int P = 20000;
    auto noise = paths::sample_noise(grid, levy, 1, P, 77);
    const double lam = levy.total_intensity * 2.0;
    double mean = 0, var = 0;
    for (const auto& evs : noise.jumps) mean += double(evs.size());
    mean /= P;
    for (const auto& evs : noise.jumps) var += (double(evs.size()) - mean) * (double(evs.size()) - mean);
    var /= P - 1;
    CHECK(std::abs(mean - lam) <= 5 * std::sqrt(lam / P));
    CHECK(std::abs(var - lam) <= 0.15 * lam);  // Poisson: variance equals the mean
    for (const auto& evs : noise.jumps)
        for (std::size_t i = 0; i + 1 < evs.size(); ++i) CHECK(evs[i].time <= evs[i + 1].time);
}

TEST_CASE("compensated pure-jump dynamics are a martingale") {
    const auto& preset = presets::get("pure-jump");
    auto grid = paths::TimeGrid::uniform(0, 1, 32);
    const int P = 40000;
    auto noise = paths::sample_noise(grid, preset.levy, 1, P, 5150);
    double x0 = 1.0;
    auto X = paths::euler_forward(preset.coeffs, preset.levy, grid, noise, &x0,
                                  paths::constant_policy(0), paths::zero_feedback(1));
    const double mean = terminal_mean(X, P, grid.n_steps);
    // unit jumps at intensity 3 give Var X_T = 3T; five standard errors
    CHECK(std::abs(mean - x0) <= 5 * std::sqrt(3.0 / P));
}

TEST_CASE("euler scheme has first-order weak bias in the step size") {
    const auto& preset = presets::get("drifted-linear");
    const double x0 = 1.0, exact = std::exp(0.5);
    const int P = 200000;
    auto bias = [&](int steps) {
        auto grid = paths::TimeGrid::uniform(0, 1, steps);
        auto noise = paths::sample_noise(grid, model::LevyMeasure::none(), 1, P, 31);
        auto X = paths::euler_forward(preset.coeffs, preset.levy, grid, noise, &x0,
                                      paths::constant_policy(0), paths::zero_feedback(1));
        return terminal_mean(X, P, steps) - exact;
    };
    const double b8 = bias(8), b16 = bias(16);
    // E X_T = (1 + 0.5 dt)^M, so the bias halves with the step (up to MC noise)
    CHECK(b8 < 0);
    CHECK(b16 < 0);
    const double ratio = b8 / b16;
    CHECK(ratio > 1.5);
    CHECK(ratio < 2.6);
}

TEST_CASE("euler terminal mean matches the discrete-exact value") {
    const auto& preset = presets::get("drifted-linear");
    const double x0 = 1.0;
    const int P = 200000, M = 16;
    auto grid = paths::TimeGrid::uniform(0, 1, M);
    auto noise = paths::sample_noise(grid, model::LevyMeasure::none(), 1, P, 8);
    auto X = paths::euler_forward(preset.coeffs, preset.levy, grid, noise, &x0,
                                  paths::constant_policy(0), paths::zero_feedback(1));
    const double discrete = std::pow(1.0 + 0.5 * grid.dt, M);
    CHECK(std::abs(terminal_mean(X, P, M) - discrete) <= 5 * 0.4 / std::sqrt(double(P)));
}

TEST_CASE("non-finite forward dynamics raise a solver error") {
    auto c = presets::get("zero").coeffs;
    c.b = [](double, const double* x, double, const double*, double, model::Control, double* o) {
        o[0] = std::exp(x[0] * x[0]) * 1e150;  // blows up immediately
    };
    auto grid = paths::TimeGrid::uniform(0, 1, 8);
    auto noise = paths::sample_noise(grid, model::LevyMeasure::none(), 1, 4, 1);
    double x0 = 10.0;
    CHECK_THROWS_AS(paths::euler_forward(c, model::LevyMeasure::none(), grid, noise, &x0,
                                         paths::constant_policy(0), paths::zero_feedback(1)),
                    std::runtime_error);
}
