#pragma once

#include <functional>
#include <vector>

#include "fbsdekit/dpp.hpp"
#include "fbsdekit/model.hpp"

namespace fbsdekit::pide {

using dpp::RectGrid;
using dpp::ValueField;

// Smooth test function with analytic derivatives when supplied, central
// finite differences (step h_fd) otherwise.
struct SmoothTestFunction {
    std::function<double(double, const double*)> value;
    std::function<double(double, const double*)> grad_t;           // optional
    std::function<void(double, const double*, double*)> grad_x;    // optional, out[n]
    std::function<void(double, const double*, double*)> hess_x;    // optional, out[n*n]
    double h_fd = 1e-4;

    double time_derivative(double t, const double* x) const;
    void gradient(double t, const double* x, int n, double* out) const;
    void hessian(double t, const double* x, int n, double* out) const;
};

// A^u phi(t,x) = sum_i w_i ( phi(t, x + g(t,x,phi(t,x),e_i,u)) - phi(t,x) )
double integro_A(const std::function<double(const double*)>& phi_t, double t, const double* x,
                 model::Control u, const model::CoefficientSet& coeffs,
                 const model::LevyMeasure& levy);

// B^u phi = A^u phi - sum_i w_i Dphi(t,x) . g(t,x,phi(t,x),e_i,u)
double integro_B(const std::function<double(const double*)>& phi_t, const double* grad, double t,
                 const double* x, model::Control u, const model::CoefficientSet& coeffs,
                 const model::LevyMeasure& levy);

// H0(t,x,w,Dw,D2w,u) = 1/2 tr(sigma sigma^T D2w) + Dw . b(t,x,w,Dw.sigma,A,u)
//                      + B + f(t,x,w,Dw.sigma,A,u),
// with the z-slot Dw.sigma(t,x,w,u) and the k-slot the A-term.
double hamiltonian_H0(double t, const double* x, double w, const double* Dw, const double* D2w,
                      model::Control u, const model::CoefficientSet& coeffs,
                      const model::LevyMeasure& levy, double a_term, double b_term);

// dphi/dt + sup_u H0(phi) at (t, x) for an analytic test function; the
// quantity the viscosity inequalities constrain at touch points.
double smooth_residual(const SmoothTestFunction& phi, double t, const double* x,
                       const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                       const model::ControlGrid& controls);

struct PideGrid {
    double t0 = 0, T = 1;
    int n_steps = 1;
    RectGrid space;
    double dt() const { return (T - t0) / n_steps; }

    // Validates the CFL bound dt <= 1 / (sum_a s2_a/dx_a^2 + |b|/dx + Lambda)
    // by sampling coefficients over the grid at the terminal data.
    static PideGrid make(double t0, double T, int n_steps, RectGrid space,
                         const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                         const model::ControlGrid& controls);
};

// Explicit monotone backward scheme for
//   dW/dt + sup_u H0(t, x, W, DW, D2W, u) = 0,  W(T,.) = phi.
// Upwind first differences (direction from the effective drift), central
// second differences, nonlocal terms by quadrature + multilinear
// interpolation; at boundary nodes the missing-side slope is dropped so the
// scheme stays monotone. Ties in the control max go to the smallest index.
ValueField solve_pide(const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                      const model::ControlGrid& controls, const PideGrid& grid,
                      const fbsde::TerminalFn* terminal_override = nullptr);

struct ResidualReport {
    double max_abs_residual = 0;
    std::vector<std::pair<int, std::size_t>> flagged;  // (time index, node)
    int checked = 0;
    int skipped = 0;
    bool pass = false;
};

// Paraboloid-touch residual check on a computed field: at interior nodes a
// second-order fit phi is built from the local stencil and
// dphi/dt + sup_u H0(phi) is evaluated; smooth-touch points must keep the
// residual within tol.
ResidualReport viscosity_residual(const ValueField& field, const model::CoefficientSet& coeffs,
                                  const model::LevyMeasure& levy,
                                  const model::ControlGrid& controls, double tol,
                                  int node_stride = 1);

}  // namespace fbsdekit::pide
