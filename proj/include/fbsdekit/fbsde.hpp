#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fbsdekit/model.hpp"
#include "fbsdekit/paths.hpp"

namespace fbsdekit::fbsde {

struct Box {
    std::vector<double> lo, hi;
    static Box cube(int n, double half_width) {
        Box b;
        b.lo.assign(n, -half_width);
        b.hi.assign(n, half_width);
        return b;
    }
};

// Finite regression basis over a box; evaluation extrapolates affinely
// outside it so regressed functions keep linear growth.
class Basis {
  public:
    enum class Kind { Polynomial, LocalAffine };

    static Basis polynomial(int n, int degree, Box box);
    static Basis local_affine(int n, int cells_per_axis, Box box);

    int size() const { return size_; }
    int dim() const { return n_; }
    Kind kind() const { return kind_; }
    void eval(const double* x, double* out) const;
    double eval_fit(const Eigen::VectorXd& coef, const double* x) const;

  private:
    Kind kind_ = Kind::Polynomial;
    int n_ = 1;
    int size_ = 0;
    int degree_ = 0;
    int cells_ = 1;
    Box box_;
    std::vector<std::vector<int>> exponents_;  // polynomial kind

    void eval_poly_raw(const double* x, double* out) const;
};

struct PicardConfig {
    int max_iters = 25;
    double tol = 1e-4;        // L2 gap between successive (Y, Z, sqrt(L)K) iterates
    double delta_max = 0.25;  // largest Picard subinterval length
    int halving_limit = 6;
    bool alt_k_estimator = false;  // cross-check estimator for the k-slot
};

// Regressed coefficients per time knot; K is recovered from the Y fit via
// the representation K(e) = Yhat(x + g(.,e)) - Yhat(x).
struct KnotFit {
    Eigen::VectorXd y;  // basis coefficients
    Eigen::MatrixXd z;  // [basis x d]
    bool valid = false;
};

struct BackwardSolution {
    std::vector<KnotFit> fits;  // per knot, 0..n_steps-1 (plus terminal slot unused)
    paths::PathBundle bundle;
    int ridge_fallbacks = 0;

    double y_at(const Basis& basis, int knot, const double* x) const {
        return basis.eval_fit(fits[knot].y, x);
    }
};

struct SubintervalDiag {
    int k_start = 0, k_end = 0;
    int iterations = 0;
    std::vector<double> gaps;
};

struct CoupledResult {
    BackwardSolution solution;
    double y0 = 0;
    std::vector<SubintervalDiag> diagnostics;
    int halvings = 0;
    int ridge_fallbacks = 0;
};

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what, std::vector<double> gap_seq = {})
        : std::runtime_error(what), gaps(std::move(gap_seq)) {}
    std::vector<double> gaps;
};

using TerminalFn = std::function<double(const double*)>;

// Least-squares Monte-Carlo backward sweep, forward trajectories given:
//   Yhat_k = regress(Y_{k+1} | X_k),  Z_k = regress(Y_{k+1} dB_k | X_k)/dt,
//   K_k(e_i) = Yhat_k(X_k + g(.,e_i)) - Yhat_k(X_k),
//   Y_k = Yhat_k(X_k) + dt f(t_k, X_k, Yhat_k, Z_k, sum_i w_i K_k(e_i), u).
BackwardSolution solve_bsde_decoupled(const model::CoefficientSet& coeffs,
                                      const model::LevyMeasure& levy, const paths::TimeGrid& grid,
                                      const std::vector<double>& X, const paths::NoiseBatch& noise,
                                      const Basis& basis, const TerminalFn& terminal,
                                      const paths::ControlPolicy& policy,
                                      bool alt_k_estimator = false);

// Coupled solver: partitions [t0,T] into subintervals of length <= delta_max,
// Picard-iterates forward/backward sweeps on each, and stitches them backward
// in time using the later subinterval's regressed value function as the
// earlier one's terminal condition. Non-contracting subintervals are halved
// up to halving_limit.
CoupledResult solve_fbsde_coupled(const model::CoefficientSet& coeffs,
                                  const model::LevyMeasure& levy, const paths::TimeGrid& grid,
                                  const double* x0, const paths::ControlPolicy& policy,
                                  const Basis& basis, const PicardConfig& picard, int path_count,
                                  std::uint64_t seed,
                                  const paths::NoiseBatch* shared_noise = nullptr,
                                  const TerminalFn* terminal_override = nullptr);

// J(t0, x0; u) = Y_{t0}.
double cost_functional(const model::CoefficientSet& coeffs, const model::LevyMeasure& levy,
                       const paths::TimeGrid& grid, const double* x0,
                       const paths::ControlPolicy& policy, const Basis& basis,
                       const PicardConfig& picard, int path_count, std::uint64_t seed);

struct RegularityRow {
    double x0 = 0;
    double delta = 0;
    double ratio = 0;  // E[sup_{s<=t0+delta} |X - x|^p] / (delta^{p/2} (1 + |x|^p))
};

std::vector<RegularityRow> estimate_regularity(const model::CoefficientSet& coeffs,
                                               const model::LevyMeasure& levy,
                                               const std::vector<double>& x0_list, double p,
                                               const std::vector<double>& delta_list,
                                               int path_count, std::uint64_t seed,
                                               double dt = 1.0 / 640.0);

}  // namespace fbsdekit::fbsde
