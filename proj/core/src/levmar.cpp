#include "spinid/levmar.hpp"

#include <cmath>

#include "spinid/errors.hpp"

namespace spinid {

LevMarResult levmar(const ResidualFn& residual, const JacobianFn& jacobian,
                    const Eigen::VectorXd& p0, int n_residuals,
                    const LevMarOptions& options) {
    const int n_params = static_cast<int>(p0.size());
    if (n_params == 0) {
        throw ValidationError("levmar: empty parameter vector");
    }
    if (n_residuals < n_params) {
        throw ValidationError("levmar: fewer residuals than parameters");
    }

    Eigen::VectorXd p = p0;
    Eigen::VectorXd r(n_residuals);
    Eigen::MatrixXd jac(n_residuals, n_params);

    residual(p, r);
    double chi2 = r.squaredNorm();
    double lambda = options.lambda0;

    LevMarResult out;
    out.iterations = 0;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        out.iterations = iter + 1;
        jacobian(p, jac);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;

        if (jtr.cwiseAbs().maxCoeff() < options.gradient_tol) {
            out.converged = true;
            out.message = "gradient below tolerance";
            break;
        }

        bool stepped = false;
        while (lambda <= options.lambda_max) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
            const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
            const Eigen::VectorXd p_try = p + step;

            Eigen::VectorXd r_try(n_residuals);
            residual(p_try, r_try);
            const double chi2_try = r_try.squaredNorm();
            if (std::isfinite(chi2_try) && chi2_try < chi2) {
                const double rel_step =
                    step.norm() / std::max(p.norm(), 1e-300);
                const double rel_decrease = (chi2 - chi2_try) / std::max(chi2, 1e-300);
                p = p_try;
                r = r_try;
                chi2 = chi2_try;
                lambda = std::max(lambda * options.lambda_down, 1e-14);
                stepped = true;
                if (rel_step < options.step_tol || rel_decrease < options.residual_tol) {
                    out.converged = true;
                    out.message = "step below tolerance";
                }
                break;
            }
            lambda *= options.lambda_up;
        }

        if (!stepped) {
            out.converged = true; // stuck at a (possibly local) minimum
            out.message = "damping exhausted; no further decrease";
            break;
        }
        if (out.converged) break;
    }

    if (!out.converged && out.iterations >= options.max_iterations) {
        out.message = "iteration cap reached";
    }

    out.params = p;
    out.residual_norm = std::sqrt(chi2);

    // Residual-scaled covariance at the optimum.
    jacobian(p, jac);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::MatrixXd cov = jtj.completeOrthogonalDecomposition().pseudoInverse();
    const int dof = n_residuals - n_params;
    const double scale = dof > 0 ? chi2 / dof : 1.0;
    out.covariance = scale * cov;
    return out;
}

} // namespace spinid
