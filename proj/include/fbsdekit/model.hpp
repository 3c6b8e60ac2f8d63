#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbsdekit/rng.hpp"

namespace fbsdekit::model {

// Declared Lipschitz moduli, one per coefficient, in the joint argument
// (x, y, z, k) (x only for phi).
struct LipConstants {
    double b = 0, sigma = 0, g = 0, f = 0, phi = 0;
};

// Control values are scalar; the control set U is a finite grid of them.
using Control = double;

// The model functions of the controlled forward-backward system:
//   dX = b(t,X,Y,Z,K,u)dt + sigma(t,X,Y,u)dB + integral of g(t,X,Y,e,u) dN~
//  -dY = f(t,X,Y,Z,K,u)dt - Z dB - integral of K dN~,  Y_T = phi(X_T)
// Y is scalar; X lives in R^n, Z in R^d, the k-slot is the scalar
// integral of K against the jump intensity. sigma and g take no (z,k)
// arguments by construction.
struct CoefficientSet {
    int n = 1;  // state dimension
    int d = 1;  // Brownian dimension

    // b(t, x[n], y, z[d], k, u) -> out[n]
    std::function<void(double, const double*, double, const double*, double, Control, double*)> b;
    // sigma(t, x[n], y, u) -> out[n*d] row-major
    std::function<void(double, const double*, double, Control, double*)> sigma;
    // g(t, x[n], y, e[l], u) -> out[n]
    std::function<void(double, const double*, double, const double*, Control, double*)> g;
    // f(t, x[n], y, z[d], k, u) -> scalar
    std::function<double(double, const double*, double, const double*, double, Control)> f;
    // phi(x[n]) -> scalar
    std::function<double(const double*)> phi;

    LipConstants lip;
    double comparison_K = 0.0;  // must stay > -1

    void validate() const {
        if (!(comparison_K > -1.0)) throw std::invalid_argument("comparison_K must exceed -1");
        if (n < 1 || d < 1) throw std::invalid_argument("dims must be positive");
        if (!b || !sigma || !g || !f || !phi) throw std::invalid_argument("all coefficients must be set");
    }
};

struct QuadNode {
    std::vector<double> mark;  // in R^l, nonzero
    double weight = 0;         // > 0, weights sum to total_intensity
};

// Finite-activity jump law: total mass, a seedable mark sampler and a
// discrete quadrature for integrals against lambda(de). The same nodes
// drive both the simulator's compensation and the PIDE nonlocal terms.
struct LevyMeasure {
    double total_intensity = 0;
    int dim_marks = 1;
    std::vector<QuadNode> quad_nodes;
    std::function<void(rng::CounterRng&, double*)> mark_sampler;

    void validate() const;
    double quad_weight_sum() const;

    static LevyMeasure none() {
        LevyMeasure lm;
        lm.total_intensity = 0;
        lm.mark_sampler = [](rng::CounterRng&, double* e) { e[0] = 1.0; };
        return lm;
    }
};

struct ControlGrid {
    std::vector<Control> points;
    std::function<double(Control, Control)> metric =
        [](Control a, Control b) { return std::abs(a - b); };

    void validate() const;
    static ControlGrid singleton(Control u = 0) { return ControlGrid{{u}}; }
};

// Constants of the monotonicity hypothesis; m is fixed to 1 so G is a row
// vector. The composite map A(t,v,k) = (-G^T f, G b, G sigma) lives inside
// the checker only.
struct MonotonicityCertificate {
    Eigen::RowVectorXd G;
    double beta1 = 0, beta2 = 0, mu1 = 0;

    void validate() const;
};

// Sampling domain for the randomized assumption checkers.
struct SampleBox {
    std::vector<double> x_lo, x_hi;
    double y_lo = -5, y_hi = 5;
    double z_lo = -5, z_hi = 5;
    double k_lo = -5, k_hi = 5;
    double t_lo = 0, t_hi = 1;

    static SampleBox cube(int n, double half_width) {
        SampleBox b;
        b.x_lo.assign(n, -half_width);
        b.x_hi.assign(n, half_width);
        return b;
    }
};

struct CheckReport {
    bool pass = false;
    double worst = 0;  // max ratio (lipschitz) or min slack/margin (others)
    std::map<std::string, double> per_coefficient;
    std::string note;
};

// Samples random argument pairs and compares |F(a)-F(a')|/|a-a'| against the
// declared moduli. Throws on non-finite coefficient output, echoing the input.
CheckReport check_lipschitz(const CoefficientSet& coeffs, const ControlGrid& controls,
                            const LevyMeasure& levy, const SampleBox& box, int n_samples,
                            std::uint64_t seed);

// Samples the monotonicity inequality
//   <A(t,v,k)-A(t,v',k'), v-v'> + sum_i w_i <G ghat_i, khat_i>
//     <= -beta1 |G xhat|^2 - beta2 (|G^T yhat|^2 + |G^T zhat|^2 + sum_i w_i |G^T khat_i|^2)
// together with <phi(x)-phi(x'), G(x-x')> >= mu1 |G xhat|^2, and reports the
// worst slack (RHS - LHS). K-perturbations are sampled node-supported only.
CheckReport check_monotonicity(const CoefficientSet& coeffs, const MonotonicityCertificate& cert,
                               const LevyMeasure& levy, const ControlGrid& controls,
                               const SampleBox& box, int n_samples, std::uint64_t seed);

// Samples k1 > k2 and verifies f(..,k1,u) - f(..,k2,u) >= K (k1 - k2).
CheckReport check_comparison_condition(const CoefficientSet& coeffs, const ControlGrid& controls,
                                       const SampleBox& box, int n_samples, std::uint64_t seed);

}  // namespace fbsdekit::model
