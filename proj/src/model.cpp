#include "fbsdekit/model.hpp"

#include <cmath>
#include <sstream>

namespace fbsdekit::model {

namespace {

double box_draw(rng::CounterRng& r, double lo, double hi) {
    return lo + (hi - lo) * r.next_uniform();
}

struct Args {
    double t;
    Eigen::VectorXd x;
    double y;
    Eigen::VectorXd z;
    double k;
    Control u;
};

Args sample_args(rng::CounterRng& r, const CoefficientSet& c, const ControlGrid& controls,
                 const SampleBox& box) {
    Args a;
    a.t = box_draw(r, box.t_lo, box.t_hi);
    a.x.resize(c.n);
    for (int i = 0; i < c.n; ++i) a.x[i] = box_draw(r, box.x_lo[i], box.x_hi[i]);
    a.y = box_draw(r, box.y_lo, box.y_hi);
    a.z.resize(c.d);
    for (int i = 0; i < c.d; ++i) a.z[i] = box_draw(r, box.z_lo, box.z_hi);
    a.k = box_draw(r, box.k_lo, box.k_hi);
    a.u = controls.points[std::size_t(r.next_uniform() * double(controls.points.size())) %
                          controls.points.size()];
    return a;
}

void require_finite(const double* v, int n, const char* name, const Args& a) {
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(v[i])) {
            std::ostringstream os;
            os << name << " returned non-finite value at t=" << a.t << " x=[";
            for (int j = 0; j < a.x.size(); ++j) os << a.x[j] << (j + 1 < a.x.size() ? "," : "");
            os << "] y=" << a.y << " k=" << a.k << " u=" << a.u;
            throw std::runtime_error(os.str());
        }
    }
}

}  // namespace

void LevyMeasure::validate() const {
    if (total_intensity < 0) throw std::invalid_argument("total_intensity must be nonnegative");
    const double ws = quad_weight_sum();
    const double scale = std::max(1.0, total_intensity);
    if (std::abs(ws - total_intensity) > 1e-12 * scale)
        throw std::invalid_argument("quadrature weights must sum to the total intensity");
    for (const auto& node : quad_nodes) {
        if (node.weight <= 0) throw std::invalid_argument("quadrature weights must be positive");
        double norm2 = 0;
        for (double e : node.mark) norm2 += e * e;
        if (norm2 == 0) throw std::invalid_argument("quadrature marks must be nonzero");
        if (int(node.mark.size()) != dim_marks)
            throw std::invalid_argument("mark dimension mismatch");
    }
    if (total_intensity > 0 && !mark_sampler)
        throw std::invalid_argument("active jump law needs a mark sampler");
}

double LevyMeasure::quad_weight_sum() const {
    double s = 0;
    for (const auto& node : quad_nodes) s += node.weight;
    return s;
}

void ControlGrid::validate() const {
    if (points.empty()) throw std::invalid_argument("control grid must be nonempty");
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            if (metric(points[i], points[j]) <= 0)
                throw std::invalid_argument("control grid has duplicate points");
}

void MonotonicityCertificate::validate() const {
    if (G.size() == 0 || G.norm() == 0) throw std::invalid_argument("G must be full rank (nonzero row)");
    if (beta1 < 0 || beta2 < 0 || mu1 < 0) throw std::invalid_argument("constants must be nonnegative");
    if (!(beta1 + beta2 > 0)) throw std::invalid_argument("beta1 + beta2 must be positive");
    if (!(beta2 + mu1 > 0)) throw std::invalid_argument("beta2 + mu1 must be positive");
    if (G.cols() > 1 && !(beta2 > 0))
        throw std::invalid_argument("beta2 must be positive when n > 1");
}

CheckReport check_lipschitz(const CoefficientSet& coeffs, const ControlGrid& controls,
                            const LevyMeasure& levy, const SampleBox& box, int n_samples,
                            std::uint64_t seed) {
    coeffs.validate();
    if (n_samples < 2) throw std::invalid_argument("n_samples must be at least 2");
    for (int i = 0; i < coeffs.n; ++i)
        if (!(box.x_hi[i] > box.x_lo[i])) throw std::invalid_argument("degenerate domain box");

    const int n = coeffs.n, d = coeffs.d;
    std::vector<double> out1(std::size_t(n) * d), out2(std::size_t(n) * d);
    CheckReport rep;
    rep.per_coefficient = {{"b", 0.0}, {"sigma", 0.0}, {"g", 0.0}, {"f", 0.0}, {"phi", 0.0}};

    rng::CounterRng r(seed, 0, rng::kChecker, 1);
    for (int s = 0; s < n_samples; ++s) {
        Args a = sample_args(r, coeffs, controls, box);
        Args a2 = sample_args(r, coeffs, controls, box);
        a2.t = a.t;  // Lipschitz is w.r.t. (x,y,z,k) at fixed (t,u)
        a2.u = a.u;

        double dist2 = (a.x - a2.x).squaredNorm() + (a.y - a2.y) * (a.y - a2.y) +
                       (a.z - a2.z).squaredNorm() + (a.k - a2.k) * (a.k - a2.k);
        const double dist = std::sqrt(dist2);
        if (dist == 0) continue;

        coeffs.b(a.t, a.x.data(), a.y, a.z.data(), a.k, a.u, out1.data());
        require_finite(out1.data(), n, "b", a);
        coeffs.b(a2.t, a2.x.data(), a2.y, a2.z.data(), a2.k, a2.u, out2.data());
        double diff2 = 0;
        for (int i = 0; i < n; ++i) diff2 += (out1[i] - out2[i]) * (out1[i] - out2[i]);
        rep.per_coefficient["b"] = std::max(rep.per_coefficient["b"], std::sqrt(diff2) / dist);

        const double dist_xy = std::sqrt((a.x - a2.x).squaredNorm() + (a.y - a2.y) * (a.y - a2.y));
        if (dist_xy > 0) {
            coeffs.sigma(a.t, a.x.data(), a.y, a.u, out1.data());
            require_finite(out1.data(), n * d, "sigma", a);
            coeffs.sigma(a2.t, a2.x.data(), a2.y, a2.u, out2.data());
            diff2 = 0;
            for (int i = 0; i < n * d; ++i) diff2 += (out1[i] - out2[i]) * (out1[i] - out2[i]);
            rep.per_coefficient["sigma"] =
                std::max(rep.per_coefficient["sigma"], std::sqrt(diff2) / dist_xy);

            if (!levy.quad_nodes.empty()) {
                const auto& node =
                    levy.quad_nodes[std::size_t(s) % levy.quad_nodes.size()];
                coeffs.g(a.t, a.x.data(), a.y, node.mark.data(), a.u, out1.data());
                require_finite(out1.data(), n, "g", a);
                coeffs.g(a2.t, a2.x.data(), a2.y, node.mark.data(), a2.u, out2.data());
                diff2 = 0;
                for (int i = 0; i < n; ++i) diff2 += (out1[i] - out2[i]) * (out1[i] - out2[i]);
                rep.per_coefficient["g"] =
                    std::max(rep.per_coefficient["g"], std::sqrt(diff2) / dist_xy);
            }
        }

        const double f1 = coeffs.f(a.t, a.x.data(), a.y, a.z.data(), a.k, a.u);
        require_finite(&f1, 1, "f", a);
        const double f2 = coeffs.f(a2.t, a2.x.data(), a2.y, a2.z.data(), a2.k, a2.u);
        rep.per_coefficient["f"] = std::max(rep.per_coefficient["f"], std::abs(f1 - f2) / dist);

        const double dist_x = (a.x - a2.x).norm();
        if (dist_x > 0) {
            const double p1 = coeffs.phi(a.x.data());
            require_finite(&p1, 1, "phi", a);
            const double p2 = coeffs.phi(a2.x.data());
            rep.per_coefficient["phi"] =
                std::max(rep.per_coefficient["phi"], std::abs(p1 - p2) / dist_x);
        }
    }

    const double slop = 1.0 + 1e-9;
    rep.pass = rep.per_coefficient["b"] <= coeffs.lip.b * slop &&
               rep.per_coefficient["sigma"] <= coeffs.lip.sigma * slop &&
               rep.per_coefficient["g"] <= coeffs.lip.g * slop &&
               rep.per_coefficient["f"] <= coeffs.lip.f * slop &&
               rep.per_coefficient["phi"] <= coeffs.lip.phi * slop;
    rep.worst = 0;
    for (auto& [name, ratio] : rep.per_coefficient) rep.worst = std::max(rep.worst, ratio);
    return rep;
}

CheckReport check_monotonicity(const CoefficientSet& coeffs, const MonotonicityCertificate& cert,
                               const LevyMeasure& levy, const ControlGrid& controls,
                               const SampleBox& box, int n_samples, std::uint64_t seed) {
    coeffs.validate();
    cert.validate();
    if (cert.G.cols() != coeffs.n) throw std::invalid_argument("G has wrong number of columns");

    const int n = coeffs.n, d = coeffs.d;
    const std::size_t nq = levy.quad_nodes.size();
    const double G2 = cert.G.squaredNorm();

    Eigen::VectorXd b1(n), b2(n), g1(n), g2(n);
    Eigen::MatrixXd s1(n, d), s2(n, d);

    CheckReport rep;
    rep.worst = std::numeric_limits<double>::infinity();
    rep.note = "k-perturbations sampled on quadrature nodes only";

    rng::CounterRng r(seed, 0, rng::kChecker, 2);
    for (int s = 0; s < n_samples; ++s) {
        Args a = sample_args(r, coeffs, controls, box);
        Args a2 = sample_args(r, coeffs, controls, box);
        a2.t = a.t;
        a2.u = a.u;
        // node-supported K: one value per quadrature node, per argument set
        std::vector<double> kv1(nq), kv2(nq);
        double kslot1 = 0, kslot2 = 0;
        for (std::size_t i = 0; i < nq; ++i) {
            kv1[i] = box_draw(r, box.k_lo, box.k_hi);
            kv2[i] = box_draw(r, box.k_lo, box.k_hi);
            kslot1 += levy.quad_nodes[i].weight * kv1[i];
            kslot2 += levy.quad_nodes[i].weight * kv2[i];
        }

        coeffs.b(a.t, a.x.data(), a.y, a.z.data(), kslot1, a.u, b1.data());
        coeffs.b(a2.t, a2.x.data(), a2.y, a2.z.data(), kslot2, a2.u, b2.data());
        coeffs.sigma(a.t, a.x.data(), a.y, a.u, s1.data());
        coeffs.sigma(a2.t, a2.x.data(), a2.y, a2.u, s2.data());
        const double f1 = coeffs.f(a.t, a.x.data(), a.y, a.z.data(), kslot1, a.u);
        const double f2 = coeffs.f(a2.t, a2.x.data(), a2.y, a2.z.data(), kslot2, a2.u);
        if ((b1 - b2).size() != n || s1.size() != n * d)
            throw std::invalid_argument("coefficient output dimension mismatch");

        const Eigen::VectorXd xh = a.x - a2.x;
        const double yh = a.y - a2.y;
        const Eigen::VectorXd zh = a.z - a2.z;
        const double Gx = cert.G.dot(xh);
        const double Gb = cert.G.dot(b1 - b2);
        const double Gs = (cert.G * (s1 - s2) * zh)(0);

        // <A(t,v,k)-A(t,v',k'), v-v'> with A = (-G^T f, G b, G sigma)
        double lhs = -(f1 - f2) * Gx + Gb * yh + Gs;
        for (std::size_t i = 0; i < nq; ++i) {
            const auto& node = levy.quad_nodes[i];
            coeffs.g(a.t, a.x.data(), a.y, node.mark.data(), a.u, g1.data());
            coeffs.g(a2.t, a2.x.data(), a2.y, node.mark.data(), a2.u, g2.data());
            lhs += node.weight * cert.G.dot(g1 - g2) * (kv1[i] - kv2[i]);
        }

        double k_norm = 0;
        for (std::size_t i = 0; i < nq; ++i)
            k_norm += levy.quad_nodes[i].weight * (kv1[i] - kv2[i]) * (kv1[i] - kv2[i]);
        const double rhs = -cert.beta1 * Gx * Gx -
                           cert.beta2 * (G2 * yh * yh + G2 * zh.squaredNorm() + G2 * k_norm);
        rep.worst = std::min(rep.worst, rhs - lhs);

        const double ph = coeffs.phi(a.x.data()) - coeffs.phi(a2.x.data());
        rep.worst = std::min(rep.worst, ph * Gx - cert.mu1 * Gx * Gx);
    }

    rep.pass = rep.worst >= -1e-9;
    rep.per_coefficient["min_slack"] = rep.worst;
    return rep;
}

CheckReport check_comparison_condition(const CoefficientSet& coeffs, const ControlGrid& controls,
                                       const SampleBox& box, int n_samples, std::uint64_t seed) {
    coeffs.validate();
    CheckReport rep;
    rep.worst = std::numeric_limits<double>::infinity();

    rng::CounterRng r(seed, 0, rng::kChecker, 3);
    for (int s = 0; s < n_samples; ++s) {
        Args a = sample_args(r, coeffs, controls, box);
        double k1 = box_draw(r, box.k_lo, box.k_hi);
        double k2 = box_draw(r, box.k_lo, box.k_hi);
        if (k1 < k2) std::swap(k1, k2);
        if (k1 == k2) continue;
        const double f1 = coeffs.f(a.t, a.x.data(), a.y, a.z.data(), k1, a.u);
        const double f2 = coeffs.f(a.t, a.x.data(), a.y, a.z.data(), k2, a.u);
        require_finite(&f1, 1, "f", a);
        rep.worst = std::min(rep.worst, f1 - f2 - coeffs.comparison_K * (k1 - k2));
    }
    rep.pass = rep.worst >= -1e-9;
    rep.per_coefficient["min_margin"] = rep.worst;
    return rep;
}

}  // namespace fbsdekit::model
