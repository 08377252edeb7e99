#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

// Damped least squares (Levenberg-Marquardt) with analytic Jacobians.
// Minimizes 0.5 * || r(p) ||^2 for a user-supplied residual; the damping
// schedule guarantees a monotone residual decrease across accepted steps.

namespace spinid {

struct LevMarOptions {
    int max_iterations = 200;
    double gradient_tol = 1e-10;  // max |J^T r|
    double step_tol = 1e-12;      // relative parameter step
    double residual_tol = 1e-14;  // relative residual decrease
    double lambda0 = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 0.25;
    double lambda_max = 1e12;
};

struct LevMarResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;   // residual-scaled (J^T J)^-1 at the optimum
    double residual_norm = 0.0;   // sqrt(sum r_i^2) at the optimum
    int iterations = 0;
    bool converged = false;
    std::string message;
};

/// residual(p, r) fills r (size fixed by the problem); jacobian(p, J) fills
/// the n_residuals x n_params matrix dr_i/dp_j.
using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using JacobianFn = std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)>;

/// Runs LM from p0. Never throws for non-convergence; inspect `converged`.
/// n_residuals must be >= n_params for the covariance scaling; with equality
/// the covariance is reported unscaled.
LevMarResult levmar(const ResidualFn& residual, const JacobianFn& jacobian,
                    const Eigen::VectorXd& p0, int n_residuals,
                    const LevMarOptions& options = {});

} // namespace spinid
