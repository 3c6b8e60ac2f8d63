#include "fbsdekit/pide.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fbsdekit::pide {

// ---------------------------------------------------------------------------
// SmoothTestFunction derivatives

double SmoothTestFunction::time_derivative(double t, const double* x) const {
    if (grad_t) return grad_t(t, x);
    return (value(t + h_fd, x) - value(t - h_fd, x)) / (2 * h_fd);
}

void SmoothTestFunction::gradient(double t, const double* x, int n, double* out) const {
    if (grad_x) {
        grad_x(t, x, out);
        return;
    }
    std::vector<double> xp(x, x + n);
    for (int i = 0; i < n; ++i) {
        xp[i] = x[i] + h_fd;
        const double vp = value(t, xp.data());
        xp[i] = x[i] - h_fd;
        const double vm = value(t, xp.data());
        xp[i] = x[i];
        out[i] = (vp - vm) / (2 * h_fd);
    }
}

void SmoothTestFunction::hessian(double t, const double* x, int n, double* out) const {
    if (hess_x) {
        hess_x(t, x, out);
        return;
    }
    std::vector<double> xp(x, x + n);
    const double v0 = value(t, x);
    for (int i = 0; i < n; ++i) {
        xp[i] = x[i] + h_fd;
        const double vp = value(t, xp.data());
        xp[i] = x[i] - h_fd;
        const double vm = value(t, xp.data());
        xp[i] = x[i];
        out[i * n + i] = (vp - 2 * v0 + vm) / (h_fd * h_fd);
        for (int j = i + 1; j < n; ++j) {
            xp[i] = x[i] + h_fd;
            xp[j] = x[j] + h_fd;
            const double vpp = value(t, xp.data());
            xp[j] = x[j] - h_fd;
            const double vpm = value(t, xp.data());
            xp[i] = x[i] - h_fd;
            const double vmm = value(t, xp.data());
            xp[j] = x[j] + h_fd;
            const double vmp = value(t, xp.data());
            xp[i] = x[i];
            xp[j] = x[j];
            out[i * n + j] = out[j * n + i] = (vpp - vpm - vmp + vmm) / (4 * h_fd * h_fd);
        }
    }
}

// ---------------------------------------------------------------------------
// Nonlocal operators and the Hamiltonian

double integro_A(const std::function<double(const double*)>& phi_t, double t, const double* x,
                 model::Control u, const model::CoefficientSet& coeffs,
                 const model::LevyMeasure& levy) {
    const int n = coeffs.n;
    const double w = phi_t(x);
    std::vector<double> gvec(n), xplus(n);
    double a = 0;
    for (const auto& node : levy.quad_nodes) {
        coeffs.g(t, x, w, node.mark.data(), u, gvec.data());
        for (int i = 0; i < n; ++i) xplus[i] = x[i] + gvec[i];
        a += node.weight * (phi_t(xplus.data()) - w);
    }
    return a;
}

double integro_B(const std::function<double(const double*)>& phi_t, const double* grad, double t,
                 const double* x, model::Control u, const model::CoefficientSet& coeffs,
                 const model::LevyMeasure& levy) {
    const int n = coeffs.n;
    const double w = phi_t(x);
    std::vector<double> gvec(n);
    double b = integro_A(phi_t, t, x, u, coeffs, levy);
    for (const auto& node : levy.quad_nodes) {
        coeffs.g(t, x, w, node.mark.data(), u, gvec.data());
        double dg = 0;
        for (int i = 0; i < n; ++i) dg += grad[i] * gvec[i];
        b -= node.weight * dg;
    }
    return b;
}

double hamiltonian_H0(double t, const double* x, double w, const double* Dw, const double* D2w,
                      model::Control u, const model::CoefficientSet& coeffs,
                      const model::LevyMeasure& levy, double a_term, double b_term) {
    const int n = coeffs.n, d = coeffs.d;
    std::vector<double> sig(std::size_t(n) * d);
    coeffs.sigma(t, x, w, u, sig.data());

    // 1/2 tr(sigma sigma^T D2w)
    double trace = 0;
    for (int a = 0; a < n; ++a)
        for (int bb = 0; bb < n; ++bb) {
            double s = 0;
            for (int j = 0; j < d; ++j) s += sig[std::size_t(a) * d + j] * sig[std::size_t(bb) * d + j];
            trace += s * D2w[std::size_t(a) * n + bb];
        }

    std::vector<double> z(d, 0.0);
    for (int j = 0; j < d; ++j)
        for (int a = 0; a < n; ++a) z[j] += Dw[a] * sig[std::size_t(a) * d + j];

    std::vector<double> bvec(n);
    coeffs.b(t, x, w, z.data(), a_term, u, bvec.data());
    double drift = 0;
    for (int a = 0; a < n; ++a) drift += Dw[a] * bvec[a];

    return 0.5 * trace + drift + b_term + coeffs.f(t, x, w, z.data(), a_term, u);
}

double smooth_residual(const SmoothTestFunction& phi, double t, const double* x,
                       const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                       const model::ControlGrid& controls) {
    const int n = coeffs.n;
    std::vector<double> Dw(n), D2w(std::size_t(n) * n);
    phi.gradient(t, x, n, Dw.data());
    phi.hessian(t, x, n, D2w.data());
    const double w = phi.value(t, x);
    auto slice = [&phi, t](const double* xq) { return phi.value(t, xq); };

    double best = 0;
    bool first = true;
    for (model::Control u : controls.points) {
        const double a = integro_A(slice, t, x, u, coeffs, levy);
        const double b = integro_B(slice, Dw.data(), t, x, u, coeffs, levy);
        const double h = hamiltonian_H0(t, x, w, Dw.data(), D2w.data(), u, coeffs, levy, a, b);
        if (first || h > best) best = h;
        first = false;
    }
    return phi.time_derivative(t, x) + best;
}

// ---------------------------------------------------------------------------
// Explicit monotone scheme

namespace {

struct GridIndexer {
    const RectGrid& grid;
    std::vector<std::size_t> strides;

    explicit GridIndexer(const RectGrid& g) : grid(g), strides(g.dim(), 1) {
        for (int i = g.dim() - 2; i >= 0; --i) strides[i] = strides[i + 1] * g.axes[i + 1].size();
    }
    std::vector<int> positions(std::size_t idx) const {
        std::vector<int> pos(grid.dim());
        for (int i = 0; i < grid.dim(); ++i) {
            pos[i] = int(idx / strides[i]);
            idx %= strides[i];
        }
        return pos;
    }
};

// scheme coefficients at one node; throws when the CFL budget is exhausted
double node_hamiltonian(const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                        model::Control u, double t, const double* x, const ValueField& field,
                        int next_level, const GridIndexer& ix, std::size_t idx,
                        const std::vector<int>& pos, double dt, bool enforce_cfl) {
    const int n = coeffs.n, d = coeffs.d;
    const std::size_t base = std::size_t(next_level) * field.grid.node_count();
    const double w = field.values[base + idx];

    std::vector<double> sig(std::size_t(n) * d);
    coeffs.sigma(t, x, w, u, sig.data());

    // jump displacement and A-term against the interpolated next level
    std::vector<double> gvec(n), xplus(n), gsum(n, 0.0);
    double a_term = 0;
    for (const auto& node : levy.quad_nodes) {
        coeffs.g(t, x, w, node.mark.data(), u, gvec.data());
        for (int i = 0; i < n; ++i) {
            xplus[i] = x[i] + gvec[i];
            gsum[i] += node.weight * gvec[i];
        }
        a_term += node.weight * (field.interp(next_level, xplus.data()) - w);
    }

    // neighbor differences per axis
    std::vector<double> dw_fwd(n, 0.0), dw_bwd(n, 0.0), d2(n, 0.0), dx(n, 1.0);
    std::vector<bool> has_fwd(n), has_bwd(n);
    for (int i = 0; i < n; ++i) {
        const auto& axis = field.grid.axes[i];
        const int p = pos[i];
        dx[i] = axis.size() > 1 ? axis[1] - axis[0] : 1.0;
        has_fwd[i] = p + 1 < int(axis.size());
        has_bwd[i] = p > 0;
        const double wc = field.values[base + idx];
        if (has_fwd[i])
            dw_fwd[i] = (field.values[base + idx + ix.strides[i]] - wc) / dx[i];
        if (has_bwd[i])
            dw_bwd[i] = (wc - field.values[base + idx - ix.strides[i]]) / dx[i];
        if (has_fwd[i] && has_bwd[i])
            d2[i] = (field.values[base + idx + ix.strides[i]] - 2 * wc +
                     field.values[base + idx - ix.strides[i]]) /
                    (dx[i] * dx[i]);
    }

    // direction pass with the central slope, then the upwinded evaluation
    std::vector<double> Dw(n), z(d), bvec(n);
    for (int i = 0; i < n; ++i)
        Dw[i] = has_fwd[i] && has_bwd[i] ? 0.5 * (dw_fwd[i] + dw_bwd[i])
                                         : (has_fwd[i] ? dw_fwd[i] : dw_bwd[i]);
    std::fill(z.begin(), z.end(), 0.0);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < n; ++i) z[j] += Dw[i] * sig[std::size_t(i) * d + j];
    coeffs.b(t, x, w, z.data(), a_term, u, bvec.data());

    for (int i = 0; i < n; ++i) {
        const double beff = bvec[i] - gsum[i];
        if (beff >= 0)
            Dw[i] = has_fwd[i] ? dw_fwd[i] : 0.0;  // missing side: drop the slope
        else
            Dw[i] = has_bwd[i] ? dw_bwd[i] : 0.0;
    }
    std::fill(z.begin(), z.end(), 0.0);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < n; ++i) z[j] += Dw[i] * sig[std::size_t(i) * d + j];
    coeffs.b(t, x, w, z.data(), a_term, u, bvec.data());

    double h = coeffs.f(t, x, w, z.data(), a_term, u) + a_term;
    double cfl = levy.total_intensity;
    for (int i = 0; i < n; ++i) {
        double s2 = 0;
        for (int j = 0; j < d; ++j) s2 += sig[std::size_t(i) * d + j] * sig[std::size_t(i) * d + j];
        h += 0.5 * s2 * d2[i] + Dw[i] * (bvec[i] - gsum[i]);
        cfl += s2 / (dx[i] * dx[i]) + std::abs(bvec[i] - gsum[i]) / dx[i];
    }
    if (enforce_cfl && dt * cfl > 1.0 + 1e-9) {
        std::ostringstream os;
        os << "CFL violated at t=" << t << ": dt*" << cfl << " > 1; reduce the time step to below "
           << 1.0 / cfl;
        throw std::runtime_error(os.str());
    }
    return h;
}

}  // namespace

PideGrid PideGrid::make(double t0, double T, int n_steps, RectGrid space,
                        const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                        const model::ControlGrid& controls) {
    PideGrid g;
    g.t0 = t0;
    g.T = T;
    g.n_steps = n_steps;
    g.space = std::move(space);

    // sample the CFL budget over grid nodes at the terminal data
    const int n = coeffs.n, d = coeffs.d;
    std::vector<double> x(n), sig(std::size_t(n) * d), bvec(n), z(d, 0.0), gvec(n);
    double worst = levy.total_intensity;
    const std::size_t nodes = g.space.node_count();
    const std::size_t stride = std::max<std::size_t>(1, nodes / 64);
    for (std::size_t idx = 0; idx < nodes; idx += stride) {
        g.space.node_coords(idx, x.data());
        const double w = coeffs.phi(x.data());
        for (model::Control u : controls.points) {
            coeffs.sigma(t0, x.data(), w, u, sig.data());
            coeffs.b(t0, x.data(), w, z.data(), 0.0, u, bvec.data());
            double cfl = levy.total_intensity;
            for (int i = 0; i < n; ++i) {
                const double dx = g.space.axes[i].size() > 1
                                      ? g.space.axes[i][1] - g.space.axes[i][0]
                                      : 1.0;
                double s2 = 0, gs = 0;
                for (int j = 0; j < d; ++j)
                    s2 += sig[std::size_t(i) * d + j] * sig[std::size_t(i) * d + j];
                for (const auto& node : levy.quad_nodes) {
                    coeffs.g(t0, x.data(), w, node.mark.data(), u, gvec.data());
                    gs += node.weight * gvec[i];
                }
                cfl += s2 / (dx * dx) + (std::abs(bvec[i]) + std::abs(gs)) / dx;
            }
            worst = std::max(worst, cfl);
        }
    }
    if (g.dt() * worst > 1.0) {
        std::ostringstream os;
        os << "PideGrid: CFL bound requires at least " << int(std::ceil((T - t0) * worst))
           << " time steps, got " << n_steps;
        throw std::invalid_argument(os.str());
    }
    return g;
}

ValueField solve_pide(const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                      const model::ControlGrid& controls, const PideGrid& grid,
                      const fbsde::TerminalFn* terminal_override) {
    coeffs.validate();
    controls.validate();
    const int N = grid.n_steps;
    const std::size_t nodes = grid.space.node_count();
    const int nd = grid.space.dim();
    const double dt = grid.dt();

    ValueField field;
    field.times.resize(N + 1);
    for (int k = 0; k <= N; ++k) field.times[k] = grid.t0 + k * dt;
    field.times.back() = grid.T;
    field.grid = grid.space;
    field.values.assign(std::size_t(N + 1) * nodes, 0.0);
    field.argmax.assign(std::size_t(N + 1) * nodes, -1);

    GridIndexer ix(field.grid);
    std::vector<double> x(nd);
    for (std::size_t idx = 0; idx < nodes; ++idx) {
        field.grid.node_coords(idx, x.data());
        field.at(N, idx) = terminal_override ? (*terminal_override)(x.data())
                                             : coeffs.phi(x.data());
    }

    for (int k = N - 1; k >= 0; --k) {
        const double t = field.times[k];
        for (std::size_t idx = 0; idx < nodes; ++idx) {
            field.grid.node_coords(idx, x.data());
            const auto pos = ix.positions(idx);
            double best = 0;
            int best_u = -1;
            for (std::size_t ui = 0; ui < controls.points.size(); ++ui) {
                const double h = node_hamiltonian(coeffs, levy, controls.points[ui], t, x.data(),
                                                  field, k + 1, ix, idx, pos, dt, true);
                if (best_u < 0 || h > best) {
                    best = h;
                    best_u = int(ui);
                }
            }
            const double v = field.at(k + 1, idx) + dt * best;
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "solve_pide: non-finite node at t=" << t << " node " << idx;
                throw std::runtime_error(os.str());
            }
            field.at(k, idx) = v;
            field.argmax[std::size_t(k) * nodes + idx] = best_u;
        }
    }
    return field;
}

ResidualReport viscosity_residual(const ValueField& field, const model::CoefficientSet& coeffs,
                                  const model::LevyMeasure& levy,
                                  const model::ControlGrid& controls, double tol,
                                  int node_stride) {
    const int nd = field.grid.dim();
    const std::size_t nodes = field.grid.node_count();
    const int N = int(field.times.size()) - 1;
    GridIndexer ix(field.grid);

    ResidualReport rep;
    std::vector<double> x(nd);

    for (int k = 0; k < N; ++k) {
        const double t = field.times[k];
        const double dt_level = field.times[k + 1] - field.times[k];
        for (std::size_t idx = 0; idx < nodes; idx += std::max(1, node_stride)) {
            const auto pos = ix.positions(idx);
            bool interior = true;
            for (int i = 0; i < nd; ++i)
                interior &= pos[i] > 0 && pos[i] + 1 < int(field.grid.axes[i].size());
            if (!interior) {
                rep.skipped++;
                continue;
            }
            field.grid.node_coords(idx, x.data());

            // local paraboloid from the stencil; time slope one-sided forward
            const double w0 = field.at(k, idx);
            const double pt = (field.at(k + 1, idx) - w0) / dt_level;
            std::vector<double> p(nd), hess(std::size_t(nd) * nd, 0.0);
            bool ok = true;
            for (int i = 0; i < nd; ++i) {
                const double dx = field.grid.axes[i][pos[i] + 1] - field.grid.axes[i][pos[i]];
                const double wp = field.at(k, idx + ix.strides[i]);
                const double wm = field.at(k, idx - ix.strides[i]);
                if (!std::isfinite(wp) || !std::isfinite(wm)) ok = false;
                p[i] = (wp - wm) / (2 * dx);
                hess[std::size_t(i) * nd + i] = (wp - 2 * w0 + wm) / (dx * dx);
            }
            if (!ok) {
                rep.skipped++;
                continue;
            }

            SmoothTestFunction phi;
            const std::vector<double> x0v = x;
            phi.value = [w0, pt, p, hess, x0v, t, nd](double s, const double* y) {
                double v = w0 + pt * (s - t);
                for (int i = 0; i < nd; ++i) {
                    v += p[i] * (y[i] - x0v[i]);
                    for (int j = 0; j < nd; ++j)
                        v += 0.5 * hess[std::size_t(i) * nd + j] * (y[i] - x0v[i]) *
                             (y[j] - x0v[j]);
                }
                return v;
            };
            phi.grad_t = [pt](double, const double*) { return pt; };
            phi.grad_x = [p, hess, x0v, nd](double, const double* y, double* out) {
                for (int i = 0; i < nd; ++i) {
                    out[i] = p[i];
                    for (int j = 0; j < nd; ++j)
                        out[i] += hess[std::size_t(i) * nd + j] * (y[j] - x0v[j]);
                }
            };
            phi.hess_x = [hess, nd](double, const double*, double* out) {
                std::copy(hess.begin(), hess.end(), out);
            };

            const double r = smooth_residual(phi, t, x.data(), coeffs, levy, controls);
            rep.checked++;
            rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(r));
            if (std::abs(r) > tol) rep.flagged.emplace_back(k, idx);
        }
    }
    rep.pass = rep.flagged.empty();
    return rep;
}

}  // namespace fbsdekit::pide
