#include "fbsdekit/dpp.hpp"

#include <cmath>
#include <stdexcept>

#include "fbsdekit/rng.hpp"

namespace fbsdekit::dpp {

RectGrid RectGrid::uniform_1d(double lo, double hi, int nodes) {
    if (nodes < 2 || !(hi > lo)) throw std::invalid_argument("bad state grid");
    RectGrid g;
    g.axes.resize(1);
    g.axes[0].resize(nodes);
    for (int i = 0; i < nodes; ++i) g.axes[0][i] = lo + (hi - lo) * i / (nodes - 1);
    return g;
}

std::size_t RectGrid::node_count() const {
    std::size_t c = 1;
    for (const auto& a : axes) c *= a.size();
    return c;
}

void RectGrid::node_coords(std::size_t idx, double* x) const {
    for (int i = dim() - 1; i >= 0; --i) {
        x[i] = axes[i][idx % axes[i].size()];
        idx /= axes[i].size();
    }
}

double ValueField::interp(int t_idx, const double* x, bool* extrapolated) const {
    const int nd = grid.dim();
    // per axis: cell index from the clamped coordinate, unclamped fraction
    // so boundary cells extend affinely
    std::vector<int> cell(nd);
    std::vector<double> frac(nd);
    for (int i = 0; i < nd; ++i) {
        const auto& a = grid.axes[i];
        const double xc = std::clamp(x[i], a.front(), a.back());
        if (extrapolated && xc != x[i]) *extrapolated = true;
        int c = int(std::upper_bound(a.begin(), a.end(), xc) - a.begin()) - 1;
        c = std::clamp(c, 0, int(a.size()) - 2);
        cell[i] = c;
        frac[i] = (x[i] - a[c]) / (a[c + 1] - a[c]);
    }
    const std::size_t base = std::size_t(t_idx) * grid.node_count();
    double v = 0;
    for (int corner = 0; corner < (1 << nd); ++corner) {
        double w = 1;
        std::size_t idx = 0;
        for (int i = 0; i < nd; ++i) {
            const bool hi = corner & (1 << i);
            w *= hi ? frac[i] : (1 - frac[i]);
            idx = idx * grid.axes[i].size() + (cell[i] + (hi ? 1 : 0));
        }
        v += w * values[base + idx];
    }
    return v;
}

std::vector<double> ValueField::lipschitz_estimate() const {
    const int nd = grid.dim();
    const std::size_t nodes = grid.node_count();
    std::vector<double> out(times.size(), 0.0);
    std::vector<std::size_t> strides(nd, 1);
    for (int i = nd - 2; i >= 0; --i) strides[i] = strides[i + 1] * grid.axes[i + 1].size();
    for (std::size_t t = 0; t < times.size(); ++t) {
        double worst = 0;
        for (std::size_t idx = 0; idx < nodes; ++idx) {
            std::size_t rem = idx;
            for (int i = 0; i < nd; ++i) {
                const std::size_t pos = rem / strides[i];
                rem %= strides[i];
                if (pos + 1 < grid.axes[i].size()) {
                    const double dv = at(int(t), idx + strides[i]) - at(int(t), idx);
                    const double dx = grid.axes[i][pos + 1] - grid.axes[i][pos];
                    worst = std::max(worst, std::abs(dv / dx));
                }
            }
        }
        out[t] = worst;
    }
    return out;
}

double backward_semigroup(const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                          double t, const double* x, model::Control u_const, double delta,
                          int fine_steps, const fbsde::TerminalFn& psi, const fbsde::Basis& basis,
                          const fbsde::PicardConfig& picard, int path_count, std::uint64_t seed,
                          const paths::NoiseBatch* shared_noise) {
    // light sampling check that psi behaves like a Lipschitz terminal
    {
        std::vector<double> a(coeffs.n, 0.0), b(coeffs.n, 0.0);
        for (int i = 0; i < coeffs.n; ++i) {
            a[i] = x[i] - 1;
            b[i] = x[i] + 1;
        }
        const double va = psi(a.data()), vb = psi(b.data());
        if (!std::isfinite(va) || !std::isfinite(vb) || std::abs(vb - va) > 1e9)
            throw std::invalid_argument("terminal psi is not usable (non-finite or wild growth)");
    }

    paths::TimeGrid grid = paths::TimeGrid::uniform(t, t + delta, fine_steps);
    fbsde::PicardConfig pc = picard;
    pc.delta_max = std::min(pc.delta_max, delta);
    auto res = fbsde::solve_fbsde_coupled(coeffs, levy, grid, x,
                                          paths::constant_policy(u_const), basis, pc, path_count,
                                          seed, shared_noise, &psi);
    return res.y0;
}

namespace {

fbsde::Basis semigroup_basis(const RectGrid& grid, int degree) {
    fbsde::Box box;
    for (const auto& a : grid.axes) {
        // widen a little so simulated excursions stay in the fit region
        const double pad = 0.25 * (a.back() - a.front());
        box.lo.push_back(a.front() - pad);
        box.hi.push_back(a.back() + pad);
    }
    return fbsde::Basis::polynomial(int(grid.axes.size()), degree, box);
}

double sup_over_controls(const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                         const model::ControlGrid& controls, double t, const double* x,
                         double delta, const fbsde::TerminalFn& psi, const fbsde::Basis& basis,
                         const DppConfig& cfg, const paths::NoiseBatch* noise, int* arg_out) {
    double best = 0;
    int best_u = -1;
    for (std::size_t ui = 0; ui < controls.points.size(); ++ui) {
        const double v =
            backward_semigroup(coeffs, levy, t, x, controls.points[ui], delta,
                               cfg.fine_steps_per_dpp, psi, basis, cfg.picard, cfg.path_count,
                               cfg.seed, noise);
        if (best_u < 0 || v > best) {  // ties keep the smallest control index
            best = v;
            best_u = int(ui);
        }
    }
    if (arg_out) *arg_out = best_u;
    return best;
}

}  // namespace

ValueFieldResult compute_value_function(const model::CoefficientSet& coeffs,
                                        const model::LevyMeasure& levy,
                                        const model::ControlGrid& controls,
                                        const std::vector<double>& dpp_times,
                                        const RectGrid& state_grid, const DppConfig& cfg) {
    coeffs.validate();
    controls.validate();
    if (dpp_times.size() < 2) throw std::invalid_argument("need at least two DPP knots");
    const std::size_t nodes = state_grid.node_count();
    const int N = int(dpp_times.size()) - 1;
    const int nd = state_grid.dim();

    ValueFieldResult out;
    ValueField& field = out.field;
    field.times = dpp_times;
    field.grid = state_grid;
    field.values.assign(std::size_t(N + 1) * nodes, 0.0);
    field.argmax.assign(std::size_t(N + 1) * nodes, -1);

    std::vector<double> x(nd);
    for (std::size_t idx = 0; idx < nodes; ++idx) {
        state_grid.node_coords(idx, x.data());
        field.at(N, idx) = coeffs.phi(x.data());
    }

    const fbsde::Basis basis = semigroup_basis(state_grid, cfg.basis_degree);

    for (int k = N - 1; k >= 0; --k) {
        const double t = dpp_times[k];
        const double delta = dpp_times[k + 1] - dpp_times[k];
        paths::TimeGrid step_grid = paths::TimeGrid::uniform(t, t + delta, cfg.fine_steps_per_dpp);
        const paths::NoiseBatch noise = paths::sample_noise(
            step_grid, levy, coeffs.d, cfg.path_count, rng::mix64(cfg.seed ^ (0x5d7 + k)));

        long* extrap = &out.extrapolation_queries;
        const ValueField* fptr = &field;
        const int next = k + 1;
        fbsde::TerminalFn psi = [fptr, next, extrap](const double* xq) {
            bool e = false;
            const double v = fptr->interp(next, xq, &e);
            if (e) ++(*extrap);
            return v;
        };

        for (std::size_t idx = 0; idx < nodes; ++idx) {
            state_grid.node_coords(idx, x.data());
            int arg = -1;
            field.at(k, idx) =
                sup_over_controls(coeffs, levy, controls, t, x.data(), delta, psi, basis, cfg,
                                  &noise, &arg);
            field.argmax[std::size_t(k) * nodes + idx] = arg;
        }
    }
    return out;
}

ConsistencyReport dpp_consistency_check(const ValueField& field,
                                        const model::CoefficientSet& coeffs,
                                        const model::LevyMeasure& levy,
                                        const model::ControlGrid& controls,
                                        const std::vector<ProbePoint>& probes, int delta_steps,
                                        const DppConfig& cfg, double tol, std::uint64_t seed) {
    if (delta_steps < 1) throw std::invalid_argument("delta_steps must be positive");
    ConsistencyReport rep;
    const fbsde::Basis basis = semigroup_basis(field.grid, cfg.basis_degree);

    for (const auto& probe : probes) {
        const int tj = probe.t_idx + delta_steps;
        if (tj >= int(field.times.size()))
            throw std::invalid_argument("probe horizon extends past the terminal time");
        const double t = field.times[probe.t_idx];
        const double delta = field.times[tj] - t;

        const ValueField* fptr = &field;
        fbsde::TerminalFn psi = [fptr, tj](const double* xq) { return fptr->interp(tj, xq); };

        DppConfig probe_cfg = cfg;
        probe_cfg.seed = rng::mix64(seed ^ (0xabc + probe.t_idx));
        probe_cfg.fine_steps_per_dpp = cfg.fine_steps_per_dpp * delta_steps;
        const double recomputed =
            sup_over_controls(coeffs, levy, controls, t, probe.x.data(), delta, psi, basis,
                              probe_cfg, nullptr, nullptr);
        const double stored = field.interp(probe.t_idx, probe.x.data());
        rep.defects.push_back(std::abs(recomputed - stored));
        rep.max_defect = std::max(rep.max_defect, rep.defects.back());
    }
    rep.pass = rep.max_defect <= tol;
    return rep;
}

TimeContinuityReport check_time_continuity(const ValueField& field, double min_slope) {
    const std::size_t nodes = field.grid.node_count();
    const int nd = field.grid.dim();
    const int N = int(field.times.size()) - 1;
    TimeContinuityReport rep;

    std::vector<double> log_d, log_inc, x(nd);
    for (int spacing = 1; spacing <= N; spacing *= 2) {
        double worst = 0;
        for (int t = 0; t + spacing <= N; ++t) {
            for (std::size_t idx = 0; idx < nodes; ++idx) {
                field.grid.node_coords(idx, x.data());
                double xnorm = 0;
                for (int i = 0; i < nd; ++i) xnorm += x[i] * x[i];
                const double inc = std::abs(field.at(t, idx) - field.at(t + spacing, idx)) /
                                   (1.0 + std::sqrt(xnorm));
                worst = std::max(worst, inc);
            }
        }
        rep.max_normalized_increment = std::max(rep.max_normalized_increment, worst);
        const double delta = field.times[spacing] - field.times[0];
        if (worst > 1e-14) {
            log_d.push_back(std::log(delta));
            log_inc.push_back(std::log(worst));
        }
    }

    if (log_d.size() < 2) {
        // increments vanish (time-independent field); trivially continuous
        rep.fitted_exponent = 1.0;
        rep.pass = true;
        return rep;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < log_d.size(); ++i) {
        mx += log_d[i];
        my += log_inc[i];
    }
    mx /= double(log_d.size());
    my /= double(log_d.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < log_d.size(); ++i) {
        sxx += (log_d[i] - mx) * (log_d[i] - mx);
        sxy += (log_d[i] - mx) * (log_inc[i] - my);
    }
    rep.fitted_exponent = sxy / sxx;
    rep.pass = rep.fitted_exponent >= min_slope;
    return rep;
}

}  // namespace fbsdekit::dpp
