#include "fbsdekit/fbsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fbsdekit/kernels.hpp"

namespace fbsdekit::fbsde {

// ---------------------------------------------------------------------------
// Basis

Basis Basis::polynomial(int n, int degree, Box box) {
    Basis b;
    b.kind_ = Kind::Polynomial;
    b.n_ = n;
    b.degree_ = degree;
    b.box_ = std::move(box);
    // total-degree monomial exponents
    std::vector<int> expo(n, 0);
    std::function<void(int, int)> gen = [&](int axis, int remaining) {
        if (axis == n) {
            b.exponents_.push_back(expo);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            expo[axis] = e;
            gen(axis + 1, remaining - e);
        }
        expo[axis] = 0;
    };
    gen(0, degree);
    b.size_ = int(b.exponents_.size());
    return b;
}

Basis Basis::local_affine(int n, int cells_per_axis, Box box) {
    Basis b;
    b.kind_ = Kind::LocalAffine;
    b.n_ = n;
    b.cells_ = std::max(1, cells_per_axis);
    b.box_ = std::move(box);
    int n_cells = 1;
    for (int i = 0; i < n; ++i) n_cells *= b.cells_;
    b.size_ = n_cells * (n + 1);
    return b;
}

void Basis::eval_poly_raw(const double* x, double* out) const {
    for (int j = 0; j < size_; ++j) {
        double v = 1;
        for (int i = 0; i < n_; ++i)
            for (int e = 0; e < exponents_[j][i]; ++e) v *= x[i];
        out[j] = v;
    }
}

void Basis::eval(const double* x, double* out) const {
    if (kind_ == Kind::Polynomial) {
        // clamp to the box, continue affinely outside
        std::vector<double> xc(n_);
        bool outside = false;
        for (int i = 0; i < n_; ++i) {
            xc[i] = std::clamp(x[i], box_.lo[i], box_.hi[i]);
            outside |= (xc[i] != x[i]);
        }
        eval_poly_raw(xc.data(), out);
        if (!outside) return;
        for (int j = 0; j < size_; ++j) {
            for (int i = 0; i < n_; ++i) {
                const double dx = x[i] - xc[i];
                if (dx == 0 || exponents_[j][i] == 0) continue;
                double dv = double(exponents_[j][i]);
                for (int a = 0; a < n_; ++a) {
                    const int e = exponents_[j][a] - (a == i ? 1 : 0);
                    for (int q = 0; q < e; ++q) dv *= xc[a];
                }
                out[j] += dv * dx;
            }
        }
        return;
    }
    // local-affine: cell from the clamped point; affine part uses raw x so
    // boundary cells extrapolate affinely
    std::fill(out, out + size_, 0.0);
    int cell = 0;
    for (int i = 0; i < n_; ++i) {
        const double lo = box_.lo[i], hi = box_.hi[i];
        const double w = (hi - lo) / cells_;
        const double xc = std::clamp(x[i], lo, hi);
        int ci = std::min(int((xc - lo) / w), cells_ - 1);
        cell = cell * cells_ + ci;
    }
    const int base = cell * (n_ + 1);
    out[base] = 1.0;
    int cell_rem = cell;
    std::vector<int> idx(n_);
    for (int i = n_ - 1; i >= 0; --i) {
        idx[i] = cell_rem % cells_;
        cell_rem /= cells_;
    }
    for (int i = 0; i < n_; ++i) {
        const double w = (box_.hi[i] - box_.lo[i]) / cells_;
        const double center = box_.lo[i] + (idx[i] + 0.5) * w;
        out[base + 1 + i] = x[i] - center;
    }
}

double Basis::eval_fit(const Eigen::VectorXd& coef, const double* x) const {
    std::vector<double> phi(size_);
    eval(x, phi.data());
    return kernels::dot(phi.data(), coef.data(), std::size_t(size_));
}

// ---------------------------------------------------------------------------
// Cross-sectional regression at one knot. Columns are basis functions over
// paths; the Gram matrix is assembled with the dot kernel and factorized
// once per knot, with a trace-scaled ridge fallback when singular.

namespace {

class KnotRegression {
  public:
    KnotRegression(const Basis& basis, const double* X, std::size_t x_stride, int P)
        : B_(basis.size()), P_(P), cols_(B_, std::vector<double>(P)) {
        std::vector<double> phi(B_);
        for (int p = 0; p < P; ++p) {
            basis.eval(X + std::size_t(p) * x_stride, phi.data());
            for (int j = 0; j < B_; ++j) cols_[j][p] = phi[j];
        }
        Eigen::MatrixXd gram(B_, B_);
        for (int i = 0; i < B_; ++i)
            for (int j = i; j < B_; ++j)
                gram(i, j) = gram(j, i) = kernels::dot(cols_[i].data(), cols_[j].data(), P);
        ldlt_.compute(gram);
        const double trace = gram.trace();
        const double dmin = ldlt_.vectorD().minCoeff();
        if (!(dmin > 1e-12 * std::max(trace, 1e-300))) {
            ridged_ = true;
            Eigen::MatrixXd reg = gram;
            reg.diagonal().array() += 1e-8 * std::max(trace / B_, 1e-12);
            ldlt_.compute(reg);
        }
    }

    Eigen::VectorXd solve(const double* targets) const {
        Eigen::VectorXd rhs(B_);
        for (int j = 0; j < B_; ++j) rhs[j] = kernels::dot(cols_[j].data(), targets, P_);
        return ldlt_.solve(rhs);
    }

    double predict(const Eigen::VectorXd& coef, int p) const {
        double v = 0;
        for (int j = 0; j < B_; ++j) v += coef[j] * cols_[j][p];
        return v;
    }

    bool ridged() const { return ridged_; }

  private:
    int B_, P_;
    std::vector<std::vector<double>> cols_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    bool ridged_ = false;
};

std::vector<int> jump_counts(const paths::NoiseBatch& noise) {
    std::vector<int> counts(std::size_t(noise.path_count) * std::max(noise.n_steps, 1), 0);
    for (int p = 0; p < noise.path_count; ++p)
        if (!noise.jumps.empty())
            for (const auto& ev : noise.jumps[p])
                if (ev.step < noise.n_steps)
                    counts[std::size_t(p) * noise.n_steps + ev.step]++;
    return counts;
}

}  // namespace

// ---------------------------------------------------------------------------
// Decoupled backward sweep

BackwardSolution solve_bsde_decoupled(const model::CoefficientSet& coeffs,
                                      const model::LevyMeasure& levy, const paths::TimeGrid& grid,
                                      const std::vector<double>& X, const paths::NoiseBatch& noise,
                                      const Basis& basis, const TerminalFn& terminal,
                                      const paths::ControlPolicy& policy, bool alt_k_estimator) {
    const int n = coeffs.n, d = coeffs.d, M = grid.n_steps, P = noise.path_count;
    const std::size_t nq = levy.quad_nodes.size();
    const double dt = grid.dt;

    BackwardSolution sol;
    sol.fits.assign(M + 1, KnotFit{});
    auto& b = sol.bundle;
    b.grid = grid;
    b.path_count = P;
    b.n = n;
    b.d = d;
    b.n_quad = int(nq);
    b.X = X;
    b.Y.assign(std::size_t(P) * (M + 1), 0.0);
    b.Z.assign(std::size_t(P) * M * d, 0.0);
    b.K.assign(std::size_t(P) * M * std::max<std::size_t>(nq, 1), 0.0);

    for (int p = 0; p < P; ++p) {
        const double v = terminal(b.x_at(p, M));
        if (!std::isfinite(v)) throw SolverError("non-finite terminal value");
        b.Y[std::size_t(p) * (M + 1) + M] = v;
    }

    std::vector<int> counts;
    if (alt_k_estimator) counts = jump_counts(noise);

    std::vector<double> target(P), target_z(P), xplus(n), gvec(n), zvec(d);
    const std::size_t x_stride = std::size_t(M + 1) * n;

    for (int k = M - 1; k >= 0; --k) {
        const double t = grid.knots[k];
        KnotRegression reg(basis, X.data() + std::size_t(k) * n, x_stride, P);
        if (reg.ridged()) sol.ridge_fallbacks++;

        for (int p = 0; p < P; ++p) target[p] = b.Y[std::size_t(p) * (M + 1) + k + 1];
        KnotFit fit;
        fit.y = reg.solve(target.data());
        fit.z.resize(basis.size(), d);
        for (int j = 0; j < d; ++j) {
            for (int p = 0; p < P; ++p) target_z[p] = target[p] * noise.brownian(p, k, j);
            fit.z.col(j) = reg.solve(target_z.data()) / dt;
        }
        fit.valid = true;

        Eigen::VectorXd alt_coef;
        if (alt_k_estimator && levy.total_intensity > 0) {
            for (int p = 0; p < P; ++p)
                target_z[p] = target[p] * (counts[std::size_t(p) * M + k] -
                                           levy.total_intensity * dt);
            alt_coef = reg.solve(target_z.data()) / dt;
        }

        for (int p = 0; p < P; ++p) {
            const double* xk = b.x_at(p, k);
            const double yhat = reg.predict(fit.y, p);
            const model::Control u = policy(k, xk, yhat);
            for (int j = 0; j < d; ++j) {
                zvec[j] = reg.predict(fit.z.col(j), p);
                b.Z[(std::size_t(p) * M + k) * d + j] = zvec[j];
            }
            double kslot = 0;
            for (std::size_t i = 0; i < nq; ++i) {
                const auto& node = levy.quad_nodes[i];
                coeffs.g(t, xk, yhat, node.mark.data(), u, gvec.data());
                for (int a = 0; a < n; ++a) xplus[a] = xk[a] + gvec[a];
                const double ki = basis.eval_fit(fit.y, xplus.data()) - yhat;
                b.K[(std::size_t(p) * M + k) * nq + i] = ki;
                kslot += node.weight * ki;
            }
            if (alt_k_estimator && levy.total_intensity > 0)
                kslot = reg.predict(alt_coef, p);
            const double fv = coeffs.f(t, xk, yhat, zvec.data(), kslot, u);
            if (!std::isfinite(fv)) throw SolverError("non-finite regression target (driver)");
            b.Y[std::size_t(p) * (M + 1) + k] = yhat + dt * fv;
        }
        // refit so the stored coefficients represent Y_k itself (conditional
        // expectation plus the driver increment), not just E[Y_{k+1} | X_k]
        for (int p = 0; p < P; ++p) target[p] = b.Y[std::size_t(p) * (M + 1) + k];
        fit.y = reg.solve(target.data());
        sol.fits[k] = std::move(fit);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Coupled solver

namespace {

struct Segment {
    int a = 0, b = 0;
    int halvings = 0;
};

}  // namespace

CoupledResult solve_fbsde_coupled(const model::CoefficientSet& coeffs,
                                  const model::LevyMeasure& levy, const paths::TimeGrid& grid,
                                  const double* x0, const paths::ControlPolicy& policy,
                                  const Basis& basis, const PicardConfig& picard, int path_count,
                                  std::uint64_t seed, const paths::NoiseBatch* shared_noise,
                                  const TerminalFn* terminal_override) {
    coeffs.validate();
    if (!(picard.tol > 0)) throw std::invalid_argument("picard tol must be positive");
    if (!(picard.delta_max > 0)) throw std::invalid_argument("delta_max must be positive");
    const int n = coeffs.n, d = coeffs.d, M = grid.n_steps, P = path_count;
    const std::size_t nq = levy.quad_nodes.size();

    paths::NoiseBatch local_noise;
    const paths::NoiseBatch* noise = shared_noise;
    if (!noise) {
        local_noise = paths::sample_noise(grid, levy, d, P, seed);
        noise = &local_noise;
    }

    TerminalFn term = terminal_override ? *terminal_override
                                        : TerminalFn([&coeffs](const double* x) { return coeffs.phi(x); });

    std::vector<KnotFit> fits(M + 1);

    // Feedback from the current fits; unsolved knots contribute zeros.
    std::vector<double> gvec(n), xplus(n);
    paths::FeedbackFn feedback = [&](int step, const double* x, paths::Feedback& fb) {
        fb.z.assign(d, 0.0);
        if (step > M - 1 || !fits[step].valid) {
            fb.y = 0;
            fb.k = 0;
            return;
        }
        const KnotFit& f = fits[step];
        fb.y = basis.eval_fit(f.y, x);
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd cz = f.z.col(j);
            fb.z[j] = basis.eval_fit(cz, x);
        }
        fb.k = 0;
        if (nq > 0) {
            const model::Control u = policy(step, x, fb.y);
            const double t = grid.knots[step];
            for (const auto& node : levy.quad_nodes) {
                coeffs.g(t, x, fb.y, node.mark.data(), u, gvec.data());
                for (int a = 0; a < n; ++a) xplus[a] = x[a] + gvec[a];
                fb.k += node.weight * (basis.eval_fit(f.y, xplus.data()) - fb.y);
            }
        }
    };

    // Initial partition into subintervals of length <= delta_max (clamped to
    // the horizon).
    const double delta_eff = std::min(picard.delta_max, grid.T - grid.t0);
    const int steps_per = std::max(1, int(std::floor(delta_eff / grid.dt + 1e-9)));
    std::vector<Segment> work;
    for (int a = 0; a < M; a += steps_per) work.push_back({a, std::min(a + steps_per, M), 0});

    CoupledResult result;

    // Evaluate the current fit triple (y, z, k-slot) on given states; used
    // for the iterate-gap metric.
    auto eval_triple = [&](const KnotFit& f, int step, const double* x, double* out_y,
                           double* out_z, double* out_k) {
        if (!f.valid) {
            *out_y = 0;
            std::fill(out_z, out_z + d, 0.0);
            *out_k = 0;
            return;
        }
        *out_y = basis.eval_fit(f.y, x);
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd cz = f.z.col(j);
            out_z[j] = basis.eval_fit(cz, x);
        }
        *out_k = 0;
        if (nq > 0) {
            const model::Control u = policy(step, x, *out_y);
            const double t = grid.knots[step];
            for (const auto& node : levy.quad_nodes) {
                coeffs.g(t, x, *out_y, node.mark.data(), u, gvec.data());
                for (int a = 0; a < n; ++a) xplus[a] = x[a] + gvec[a];
                *out_k += node.weight * (basis.eval_fit(f.y, xplus.data()) - *out_y);
            }
        }
    };

    // Solve one subinterval by Picard iteration; on failure to contract,
    // halve it and solve the later half first.
    std::function<void(Segment)> process = [&](Segment seg) {
        SubintervalDiag diag;
        diag.k_start = seg.a;
        diag.k_end = seg.b;
        const int sub_steps = seg.b - seg.a;
        paths::TimeGrid sub_grid = paths::TimeGrid::uniform(grid.t0, grid.knots[seg.b], seg.b);

        TerminalFn seg_term;
        if (seg.b == M) {
            seg_term = term;
        } else {
            if (!fits[seg.b].valid) throw SolverError("stitching fit missing");
            const Eigen::VectorXd coef = fits[seg.b].y;
            seg_term = [&basis, coef](const double* x) { return basis.eval_fit(coef, x); };
        }

        // noise truncated to this horizon
        paths::NoiseBatch sub_noise;
        sub_noise.path_count = P;
        sub_noise.n_steps = seg.b;
        sub_noise.d = noise->d;
        sub_noise.seed = noise->seed;
        sub_noise.dB.resize(std::size_t(P) * seg.b * noise->d);
        for (int p = 0; p < P; ++p)
            std::copy_n(noise->dB.begin() + std::size_t(p) * M * noise->d,
                        std::size_t(seg.b) * noise->d,
                        sub_noise.dB.begin() + std::size_t(p) * seg.b * noise->d);
        sub_noise.jumps = noise->jumps;

        bool converged = false;
        for (int it = 0; it < picard.max_iters && !converged; ++it) {
            std::vector<double> X;
            BackwardSolution sweep;
            try {
                X = paths::euler_forward(coeffs, levy, sub_grid, sub_noise, x0, policy, feedback);
                sweep = solve_bsde_decoupled(coeffs, levy, sub_grid, X, sub_noise, basis,
                                             seg_term, policy, picard.alt_k_estimator);
            } catch (const std::runtime_error&) {
                // a blown-up iterate counts as non-contraction: fall through
                // to the halving path instead of surfacing the raw overflow
                diag.gaps.push_back(std::numeric_limits<double>::infinity());
                diag.iterations = it + 1;
                break;
            }
            result.ridge_fallbacks += sweep.ridge_fallbacks;

            // iterate gap in empirical L2 over paths and segment knots,
            // jointly over (Y, Z, sqrt(intensity) K)
            double gap2 = 0;
            std::size_t count = 0;
            std::vector<double> z_old(d), z_new(d);
            for (int k = seg.a; k < seg.b; ++k) {
                for (int p = 0; p < P; ++p) {
                    const double* xk = X.data() + (std::size_t(p) * (seg.b + 1) + k) * n;
                    double y_old, k_old, y_new, k_new;
                    eval_triple(fits[k], k, xk, &y_old, z_old.data(), &k_old);
                    eval_triple(sweep.fits[k], k, xk, &y_new, z_new.data(), &k_new);
                    double s = (y_new - y_old) * (y_new - y_old);
                    for (int j = 0; j < d; ++j)
                        s += (z_new[j] - z_old[j]) * (z_new[j] - z_old[j]);
                    s += levy.total_intensity * (k_new - k_old) * (k_new - k_old);
                    gap2 += s;
                    ++count;
                }
            }
            const double gap = std::sqrt(gap2 / double(std::max<std::size_t>(count, 1)));
            diag.gaps.push_back(gap);
            diag.iterations = it + 1;

            for (int k = seg.a; k < seg.b; ++k) fits[k] = sweep.fits[k];
            if (it >= 1 && gap < picard.tol) converged = true;
        }

        if (converged) {
            result.diagnostics.push_back(std::move(diag));
            return;
        }
        if (sub_steps < 2 || seg.halvings >= picard.halving_limit) {
            std::ostringstream os;
            os << "Picard iteration failed to contract on [" << grid.knots[seg.a] << ", "
               << grid.knots[seg.b] << "] after " << picard.max_iters << " iterations and "
               << seg.halvings << " halvings";
            throw SolverError(os.str(), diag.gaps);
        }
        const int mid = seg.a + sub_steps / 2;
        result.halvings++;
        for (int k = seg.a; k < seg.b; ++k) fits[k] = KnotFit{};
        process({mid, seg.b, seg.halvings + 1});
        process({seg.a, mid, seg.halvings + 1});
    };

    for (int si = int(work.size()) - 1; si >= 0; --si) process(work[si]);

    // Final full sweep with the converged feedback.
    std::vector<double> X_full =
        paths::euler_forward(coeffs, levy, grid, *noise, x0, policy, feedback);
    result.solution = solve_bsde_decoupled(coeffs, levy, grid, X_full, *noise, basis, term,
                                           policy, picard.alt_k_estimator);
    result.ridge_fallbacks += result.solution.ridge_fallbacks;
    result.y0 = result.solution.y_at(basis, 0, x0);
    return result;
}

double cost_functional(const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                       const paths::TimeGrid& grid, const double* x0,
                       const paths::ControlPolicy& policy, const Basis& basis,
                       const PicardConfig& picard, int path_count, std::uint64_t seed) {
    return solve_fbsde_coupled(coeffs, levy, grid, x0, policy, basis, picard, path_count, seed)
        .y0;
}

std::vector<RegularityRow> estimate_regularity(const model::CoefficientSet& coeffs,
                                               const model::LevyMeasure& levy,
                                               const std::vector<double>& x0_list, double p,
                                               const std::vector<double>& delta_list,
                                               int path_count, std::uint64_t seed, double dt) {
    if (p < 2) throw std::invalid_argument("p must be at least 2");
    const int n = coeffs.n;
    std::vector<RegularityRow> rows;
    for (double x0s : x0_list) {
        std::vector<double> x0(n, x0s);
        for (double delta : delta_list) {
            const int steps = std::max(1, int(std::llround(delta / dt)));
            paths::TimeGrid grid = paths::TimeGrid::uniform(0.0, delta, steps);
            paths::NoiseBatch noise = paths::sample_noise(grid, levy, coeffs.d, path_count, seed);
            std::vector<double> X = paths::euler_forward(
                coeffs, levy, grid, noise, x0.data(), paths::constant_policy(0),
                paths::zero_feedback(coeffs.d));
            std::vector<double> sup_p(path_count, 0.0);
            for (int pa = 0; pa < path_count; ++pa) {
                double sup = 0;
                for (int k = 1; k <= steps; ++k) {
                    const double* xk = X.data() + (std::size_t(pa) * (steps + 1) + k) * n;
                    double dist2 = 0;
                    for (int i = 0; i < n; ++i) dist2 += (xk[i] - x0[i]) * (xk[i] - x0[i]);
                    sup = std::max(sup, dist2);
                }
                sup_p[pa] = std::pow(sup, p / 2.0);
            }
            double xnorm = 0;
            for (double xi : x0) xnorm += xi * xi;
            const double denom =
                std::pow(delta, p / 2.0) * (1.0 + std::pow(std::sqrt(xnorm), p));
            rows.push_back({x0s, delta, kernels::mean(sup_p) / denom});
        }
    }
    return rows;
}

}  // namespace fbsdekit::fbsde
