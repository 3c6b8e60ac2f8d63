#include <cmath>

#include "doctest.h"
#include "fbsdekit/dpp.hpp"
#include "fbsdekit/presets.hpp"

using namespace fbsdekit;

namespace {

dpp::DppConfig small_cfg(std::uint64_t seed, int paths = 2000) {
    dpp::DppConfig c;
    c.fine_steps_per_dpp = 4;
    c.basis_degree = 2;
    c.path_count = paths;
    c.seed = seed;
    return c;
}

std::vector<double> uniform_times(int steps, double T = 1.0) {
    std::vector<double> t(steps + 1);
    for (int k = 0; k <= steps; ++k) t[k] = T * k / steps;
    return t;
}

}  // namespace

TEST_CASE("rect grid indexing round-trips") {
    auto grid = dpp::RectGrid::uniform_1d(-2, 2, 5);
    CHECK(grid.node_count() == 5);
    double x;
    grid.node_coords(0, &x);
    CHECK(x == doctest::Approx(-2.0));
    grid.node_coords(4, &x);
    CHECK(x == doctest::Approx(2.0));
    grid.node_coords(2, &x);
    CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("value-field interpolation is exact on nodes and linear between them") {
    dpp::ValueField f;
    f.times = {0.0, 1.0};
    f.grid = dpp::RectGrid::uniform_1d(0, 1, 3);  // nodes 0, 0.5, 1
    f.values = {1.0, 2.0, 5.0, 0.0, 0.0, 0.0};
    double x = 0.5;
    CHECK(f.interp(0, &x) == doctest::Approx(2.0));
    x = 0.25;
    CHECK(f.interp(0, &x) == doctest::Approx(1.5));
    x = 1.25;  // beyond the box: affine continuation of the last cell
    bool extrapolated = false;
    CHECK(f.interp(0, &x, &extrapolated) == doctest::Approx(6.5));
    CHECK(extrapolated);
}

TEST_CASE("semigroup on the zero model is the identity on terminal data") {
    const auto& preset = presets::get("zero");
    auto basis = fbsde::Basis::polynomial(1, 2, fbsde::Box::cube(1, 4.0));
    fbsde::TerminalFn psi = [](const double* x) { return x[0] * x[0] - 1.0; };
    for (double x : {-1.0, 0.0, 1.5}) {
        double v = dpp::backward_semigroup(preset.coeffs, preset.levy, 0.0, &x, 0, 0.5, 4, psi,
                                           basis, fbsde::PicardConfig{}, 500, 5);
        CHECK(v == doctest::Approx(x * x - 1.0).epsilon(1e-8));
    }
}

TEST_CASE("value function on the zero model stays equal to the terminal data") {
    const auto& preset = presets::get("zero");
    auto grid = dpp::RectGrid::uniform_1d(-2, 2, 5);
    auto res = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                           uniform_times(4), grid, small_cfg(3, 500));
    double x;
    for (int k = 0; k < 5; ++k)
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            grid.node_coords(i, &x);
            CHECK(res.field.at(k, i) == doctest::Approx(x).epsilon(1e-7));
        }
}

TEST_CASE("terminal slice equals the terminal data exactly") {
    const auto& preset = presets::get("controlled-drift");
    auto grid = dpp::RectGrid::uniform_1d(-2, 2, 5);
    auto res = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                           uniform_times(2), grid, small_cfg(4, 500));
    double x;
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        grid.node_coords(i, &x);
        CHECK(res.field.at(2, i) == preset.coeffs.phi(&x));
    }
}

TEST_CASE("controlled drift: the DPP field matches x + (T - t), argmax is the largest drift") {
    const auto& preset = presets::get("controlled-drift");
    auto grid = dpp::RectGrid::uniform_1d(-2, 2, 5);
    auto res = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                           uniform_times(4), grid, small_cfg(5));
    const auto& f = res.field;
    double x;
    for (int k = 0; k <= 4; ++k)
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            grid.node_coords(i, &x);
            CHECK(std::abs(f.at(k, i) - (x + (1.0 - f.times[k]))) <= 2e-2);
            if (k < 4) CHECK(f.argmax[std::size_t(k) * grid.node_count() + i] == 2);  // u = +1
        }
}

TEST_CASE("enlarging the control set can only raise the value") {
    auto preset = presets::get("controlled-drift");
    auto grid = dpp::RectGrid::uniform_1d(-2, 2, 5);
    auto cfg = small_cfg(6);
    auto wide = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                            uniform_times(2), grid, cfg);
    preset.controls = model::ControlGrid::singleton(0);
    auto narrow = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                              uniform_times(2), grid, cfg);
    for (int k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < grid.node_count(); ++i)
            CHECK(wide.field.at(k, i) >= narrow.field.at(k, i) - 5e-3);
}

TEST_CASE("dpp consistency holds for the stored field and detects corruption") {
    const auto& preset = presets::get("controlled-drift");
    auto grid = dpp::RectGrid::uniform_1d(-2, 2, 5);
    auto cfg = small_cfg(7);
    auto res = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                           uniform_times(4), grid, cfg);
    std::vector<dpp::ProbePoint> probes = {{0, {0.0}}, {1, {1.0}}, {2, {-1.0}}};
    auto rep = dpp::dpp_consistency_check(res.field, preset.coeffs, preset.levy, preset.controls,
                                          probes, 1, cfg, 3e-2, 909);
    CHECK(rep.pass);
    CHECK(rep.max_defect <= 3e-2);

    auto corrupted = res.field;
    corrupted.at(1, 2) += 0.5;  // fault injection at the t_1, x=0 entry
    auto bad = dpp::dpp_consistency_check(corrupted, preset.coeffs, preset.levy, preset.controls,
                                          probes, 1, cfg, 3e-2, 909);
    CHECK(!bad.pass);
    CHECK(bad.max_defect >= 0.3);
}

TEST_CASE("time continuity of the value field holds at the expected rate") {
    const auto& preset = presets::get("controlled-drift");
    auto grid = dpp::RectGrid::uniform_1d(-2, 2, 9);
    auto res = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                           uniform_times(8), grid, small_cfg(8));
    auto rep = dpp::check_time_continuity(res.field);
    CHECK(rep.pass);
    CHECK(rep.fitted_exponent >= 0.35);

    // spatial Lipschitz slopes stay near 1 across all time slices
    auto slopes = res.field.lipschitz_estimate();
    for (double s : slopes) {
        CHECK(s >= 0.5);
        CHECK(s <= 1.5);
    }
}

TEST_CASE("jump model: the DPP field still tracks the controlled oracle") {
    const auto& preset = presets::get("controlled-drift-jump");
    auto grid = dpp::RectGrid::uniform_1d(-2, 2, 5);
    auto res = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                           uniform_times(4), grid, small_cfg(9, 4000));
    // terminal x, compensated jumps: W(t,x) = x + (T - t) exactly as without jumps
    double x;
    for (int k = 0; k <= 4; ++k)
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            grid.node_coords(i, &x);
            CHECK(std::abs(res.field.at(k, i) - (x + (1.0 - res.field.times[k]))) <= 3e-2);
        }
}
