#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "fbsdekit/model.hpp"

namespace fbsdekit::paths {

struct TimeGrid {
    double t0 = 0, T = 1;
    int n_steps = 1;
    double dt = 1;
    std::vector<double> knots;

    static TimeGrid uniform(double t0, double T, int n_steps) {
        if (!(T > t0) || n_steps < 1) throw std::invalid_argument("bad time grid");
        TimeGrid g;
        g.t0 = t0;
        g.T = T;
        g.n_steps = n_steps;
        g.dt = (T - t0) / n_steps;
        g.knots.resize(n_steps + 1);
        for (int k = 0; k <= n_steps; ++k) g.knots[k] = t0 + k * g.dt;
        g.knots.back() = T;
        return g;
    }
};

struct JumpEvent {
    double time = 0;
    int step = 0;  // index of the step (t_k, t_{k+1}] containing the jump
    std::vector<double> mark;
};

// Realized driving noise for a batch of paths: Brownian increments with
// variance dt and a compound-Poisson jump list per path. Fully determined
// by (grid, levy, path_count, seed).
struct NoiseBatch {
    int path_count = 0;
    int n_steps = 0;
    int d = 1;
    std::uint64_t seed = 0;
    std::vector<double> dB;  // [path * n_steps * d]
    std::vector<std::vector<JumpEvent>> jumps;  // per path

    double brownian(int path, int step, int j) const {
        return dB[(std::size_t(path) * n_steps + step) * d + j];
    }
};

// Discretized trajectories of the coupled system for one batch.
struct PathBundle {
    TimeGrid grid;
    int path_count = 0;
    int n = 1, d = 1;
    int n_quad = 0;
    std::vector<double> X;  // [path * (n_steps+1) * n]
    std::vector<double> Y;  // [path * (n_steps+1)]
    std::vector<double> Z;  // [path * n_steps * d]
    std::vector<double> K;  // [path * n_steps * n_quad]
    std::vector<int> controls_used;  // per step, policy-evaluated control index (or -1)

    double* x_at(int path, int step) {
        return X.data() + (std::size_t(path) * (grid.n_steps + 1) + step) * n;
    }
    const double* x_at(int path, int step) const {
        return X.data() + (std::size_t(path) * (grid.n_steps + 1) + step) * n;
    }
};

// Backward components the forward drift may need; zero for decoupled models.
struct Feedback {
    double y = 0;
    std::vector<double> z;
    double k = 0;
};

using ControlPolicy = std::function<model::Control(int step, const double* x, double y)>;
using FeedbackFn = std::function<void(int step, const double* x, Feedback&)>;

inline ControlPolicy constant_policy(model::Control u) {
    return [u](int, const double*, double) { return u; };
}
inline FeedbackFn zero_feedback(int d) {
    return [d](int, const double*, Feedback& fb) {
        fb.y = 0;
        fb.z.assign(d, 0.0);
        fb.k = 0;
    };
}

NoiseBatch sample_noise(const TimeGrid& grid, const model::LevyMeasure& levy, int d,
                        int path_count, std::uint64_t seed);

// Euler scheme for the controlled jump diffusion:
//   X_{k+1} = X_k + b dt + sigma dB_k + sum_{jumps in step} g(.,e)
//             - dt * sum_i w_i g(.,e_i)
// Jumps are applied at step end after the diffusion update; the compensator
// uses the quadrature nodes. Returns the X array [path * (n_steps+1) * n].
std::vector<double> euler_forward(const model::CoefficientSet& coeffs,
                                  const model::LevyMeasure& levy, const TimeGrid& grid,
                                  const NoiseBatch& noise, const double* x0,
                                  const ControlPolicy& policy, const FeedbackFn& feedback);

}  // namespace fbsdekit::paths
