#pragma once

#include <Eigen/Core>

#include <functional>

namespace agemix::optim {

/// Objective callback: returns f(x) and, when `grad` is non-null, writes the gradient.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct Options {
    int max_iter = 500;
    double grad_tol = 1e-6;
    /// Newton refinement steps (finite-difference Hessian) once BFGS stalls or finishes.
    int newton_steps = 25;
};

struct Result {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    double gradient_norm = 0.0;  // infinity norm
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Quasi-Newton (BFGS, backtracking Armijo line search) followed by damped
/// Newton refinement. Every accepted step does not increase the objective
/// beyond round-off of its current value.
Result minimize(const Objective& f, Eigen::VectorXd x0, const Options& opts = {});

/// Symmetrised central differences of the analytic gradient.
Eigen::MatrixXd finite_difference_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step = 1e-5);

/// Central finite-difference gradient of the objective value.
Eigen::VectorXd finite_difference_gradient(const Objective& f, const Eigen::VectorXd& x, double step = 1e-5);

}  // namespace agemix::optim
