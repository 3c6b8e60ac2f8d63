#include "fbsdekit/paths.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbsdekit/rng.hpp"

namespace fbsdekit::paths {

namespace {

// Poisson count by CDF inversion; fine for the finite activities used here.
int poisson_inverse(double mean, double u) {
    if (mean <= 0) return 0;
    double p = std::exp(-mean);
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 10000) {
        ++k;
        p *= mean / k;
        cdf += p;
    }
    return k;
}

}  // namespace

NoiseBatch sample_noise(const TimeGrid& grid, const model::LevyMeasure& levy, int d,
                        int path_count, std::uint64_t seed) {
    if (path_count < 1) throw std::invalid_argument("path_count must be positive");
    if (d < 1) throw std::invalid_argument("d must be positive");
    levy.validate();

    NoiseBatch nb;
    nb.path_count = path_count;
    nb.n_steps = grid.n_steps;
    nb.d = d;
    nb.seed = seed;
    nb.dB.resize(std::size_t(path_count) * grid.n_steps * d);
    const double sqdt = std::sqrt(grid.dt);
    for (int p = 0; p < path_count; ++p)
        for (int k = 0; k < grid.n_steps; ++k)
            for (int j = 0; j < d; ++j)
                nb.dB[(std::size_t(p) * grid.n_steps + k) * d + j] =
                    sqdt * rng::normal(seed, p, rng::kBrownian, std::uint64_t(k) * d + j);

    nb.jumps.resize(path_count);
    const double horizon = grid.T - grid.t0;
    const double mean_count = levy.total_intensity * horizon;
    if (mean_count > 0) {
        for (int p = 0; p < path_count; ++p) {
            const int count = poisson_inverse(mean_count, rng::uniform(seed, p, rng::kJumpCount, 0));
            auto& list = nb.jumps[p];
            list.resize(count);
            for (int i = 0; i < count; ++i) {
                const double u = rng::uniform(seed, p, rng::kJumpTime, i);
                double t = grid.t0 + u * horizon;
                list[i].time = t;
                int step = std::min(int((t - grid.t0) / grid.dt), grid.n_steps - 1);
                list[i].step = step;
                list[i].mark.resize(levy.dim_marks);
                rng::CounterRng mr(seed, p, rng::kJumpMark, i);
                levy.mark_sampler(mr, list[i].mark.data());
            }
            std::sort(list.begin(), list.end(),
                      [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
        }
    }
    return nb;
}

std::vector<double> euler_forward(const model::CoefficientSet& coeffs,
                                  const model::LevyMeasure& levy, const TimeGrid& grid,
                                  const NoiseBatch& noise, const double* x0,
                                  const ControlPolicy& policy, const FeedbackFn& feedback) {
    const int n = coeffs.n, d = coeffs.d, M = grid.n_steps;
    if (noise.d < d) throw std::invalid_argument("noise batch has too few Brownian dimensions");
    const int P = noise.path_count;

    std::vector<double> X(std::size_t(P) * (M + 1) * n);
    std::vector<double> bvec(n), svec(std::size_t(n) * d), gvec(n), gcomp(n);
    Feedback fb;
    fb.z.assign(d, 0.0);

    for (int p = 0; p < P; ++p) {
        double* xp = X.data() + std::size_t(p) * (M + 1) * n;
        for (int i = 0; i < n; ++i) xp[i] = x0[i];

        for (int k = 0; k < M; ++k) {
            const double* xk = xp + std::size_t(k) * n;
            double* xk1 = xp + std::size_t(k + 1) * n;
            const double t = grid.knots[k];

            feedback(k, xk, fb);
            const model::Control u = policy(k, xk, fb.y);

            coeffs.b(t, xk, fb.y, fb.z.data(), fb.k, u, bvec.data());
            coeffs.sigma(t, xk, fb.y, u, svec.data());
            for (int i = 0; i < n; ++i) {
                double diff = 0;
                for (int j = 0; j < d; ++j) diff += svec[std::size_t(i) * d + j] * noise.brownian(p, k, j);
                xk1[i] = xk[i] + bvec[i] * grid.dt + diff;
            }
            // compensator on the quadrature nodes
            for (const auto& node : levy.quad_nodes) {
                coeffs.g(t, xk, fb.y, node.mark.data(), u, gcomp.data());
                for (int i = 0; i < n; ++i) xk1[i] -= grid.dt * node.weight * gcomp[i];
            }
            // realized jumps in (t_k, t_{k+1}], applied at step end
            if (!noise.jumps.empty()) {
                for (const auto& ev : noise.jumps[p]) {
                    if (ev.step != k) continue;
                    coeffs.g(t, xk, fb.y, ev.mark.data(), u, gvec.data());
                    for (int i = 0; i < n; ++i) xk1[i] += gvec[i];
                }
            }
            for (int i = 0; i < n; ++i) {
                if (!std::isfinite(xk1[i])) {
                    std::ostringstream os;
                    os << "euler_forward: non-finite state at path " << p << " step " << k + 1;
                    throw std::runtime_error(os.str());
                }
            }
        }
    }
    return X;
}

}  // namespace fbsdekit::paths
