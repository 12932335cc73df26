#pragma once

// Box-bounded nonlinear least squares: minimise 0.5 * |r(theta)|^2 subject to
// lower <= theta <= upper with a reflective interior trust-region method.

#include <Eigen/Core>

#include <functional>
#include <string_view>
#include <vector>

namespace sqfit {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct BoundedProblem {
    ResidualFn residual;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd theta0;
};

struct SolverOptions {
    double gtol = 1e-8;
    double xtol = 1e-10;
    double ftol = 1e-10;
    int max_iterations = 200;
    /// Residual evaluations outside the Jacobian; 0 means 10 * max_iterations.
    int max_evaluations = 0;
};

enum class Termination { Gradient, Step, CostChange, MaxIterations };

std::string_view to_string(Termination t);

struct SolverReport {
    Eigen::VectorXd theta;
    double initial_cost = 0.0;
    double cost = 0.0;
    int iterations = 0;
    int evaluations = 0;
    Termination termination = Termination::MaxIterations;
    /// Cost at theta0 followed by the cost after every accepted step.
    std::vector<double> cost_trace;
    /// Every evaluated iterate stayed inside [lower, upper].
    bool bounds_respected = true;
};

/// Throws Errc::InvalidProblem on inconsistent sizes or bounds and
/// Errc::NonFiniteResidual when r(theta0) is not finite.
SolverReport minimize(const BoundedProblem& problem, const SolverOptions& options = {});

/// Central differences with h_i = max(1e-6, 1e-6 |theta_i|); one-sided where
/// the central stencil would leave the box.
Eigen::MatrixXd finite_difference_jacobian(const ResidualFn& fn, const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// theta clamped into the box and pulled at least 1e-6 * (upper - lower)
/// away from each bound.
Eigen::VectorXd clamp_interior(const Eigen::VectorXd& theta, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper);

}  // namespace sqfit
