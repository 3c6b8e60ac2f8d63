#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fbsdekit/fbsde.hpp"
#include "fbsdekit/model.hpp"
#include "fbsdekit/paths.hpp"

namespace fbsdekit::dpp {

// Rectangular state grid, per-axis strictly increasing coordinates.
struct RectGrid {
    std::vector<std::vector<double>> axes;

    static RectGrid uniform_1d(double lo, double hi, int nodes);
    int dim() const { return int(axes.size()); }
    std::size_t node_count() const;
    void node_coords(std::size_t idx, double* x) const;
};

// The value function W sampled on DPP knots x state grid, with
// piecewise-multilinear interpolation and affine extrapolation outside the
// box.
struct ValueField {
    std::vector<double> times;  // t0 < ... < T
    RectGrid grid;
    std::vector<double> values;  // [time * node]
    std::vector<int> argmax;     // [time * node], -1 when not applicable

    double at(int t_idx, std::size_t node) const {
        return values[std::size_t(t_idx) * grid.node_count() + node];
    }
    double& at(int t_idx, std::size_t node) {
        return values[std::size_t(t_idx) * grid.node_count() + node];
    }
    double interp(int t_idx, const double* x, bool* extrapolated = nullptr) const;

    // per-time max finite-difference slope along the axes
    std::vector<double> lipschitz_estimate() const;
};

struct DppConfig {
    int fine_steps_per_dpp = 4;
    int basis_degree = 2;
    fbsde::PicardConfig picard;
    int path_count = 4000;
    std::uint64_t seed = 1;
};

// One-step backward stochastic semigroup: solves the coupled FBSDE on
// [t, t+delta] with constant control and terminal psi(X_{t+delta}), returns
// Y_t at x. A shared NoiseBatch enables common random numbers across the
// controls being compared.
double backward_semigroup(const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                          double t, const double* x, model::Control u_const, double delta,
                          int fine_steps, const fbsde::TerminalFn& psi, const fbsde::Basis& basis,
                          const fbsde::PicardConfig& picard, int path_count, std::uint64_t seed,
                          const paths::NoiseBatch* shared_noise = nullptr);

struct ValueFieldResult {
    ValueField field;
    long extrapolation_queries = 0;
};

// Dynamic programming recursion: W(T,.) = phi, then backward
//   W(t_k, x) = max_u G_{t_k, t_{k+1}}^{x;u}[ W(t_{k+1}, .) ],
// ties broken by the smallest control index; one shared NoiseBatch per DPP
// step across all (x, u).
ValueFieldResult compute_value_function(const model::CoefficientSet& coeffs,
                                        const model::LevyMeasure& levy,
                                        const model::ControlGrid& controls,
                                        const std::vector<double>& dpp_times,
                                        const RectGrid& state_grid, const DppConfig& cfg);

struct ProbePoint {
    int t_idx = 0;
    std::vector<double> x;
};

struct ConsistencyReport {
    double max_defect = 0;
    std::vector<double> defects;
    bool pass = false;
};

// Recomputes sup_u G over a probe horizon of delta_steps DPP knots with
// fresh noise and compares against the stored field.
ConsistencyReport dpp_consistency_check(const ValueField& field,
                                        const model::CoefficientSet& coeffs,
                                        const model::LevyMeasure& levy,
                                        const model::ControlGrid& controls,
                                        const std::vector<ProbePoint>& probes, int delta_steps,
                                        const DppConfig& cfg, double tol, std::uint64_t seed);

struct TimeContinuityReport {
    double fitted_exponent = 0;
    double max_normalized_increment = 0;
    bool pass = false;
};

// |W(t,x) - W(t+delta,x)|/(1+|x|) across dyadic knot spacings; the log-log
// slope should stay at or above the 1/2-Hoelder rate minus noise allowance.
TimeContinuityReport check_time_continuity(const ValueField& field, double min_slope = 0.35);

}  // namespace fbsdekit::dpp
