#include "agemix/optim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace agemix::optim {

namespace {

double inf_norm(const Eigen::VectorXd& g) { return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff(); }

// Slack for comparing objective values that agree to within round-off.
double noise(double f) { return 1e-13 * std::max(1.0, std::abs(f)); }

struct Point {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd g;
};

class Tracker {
public:
    explicit Tracker(const Objective& f) : f_(f) {}

    Point eval(const Eigen::VectorXd& x)
    {
        Point p{x, 0.0, Eigen::VectorXd::Zero(x.size())};
        p.f = f_(x, &p.g);
        ++count_;
        if (!std::isfinite(p.f) || !p.g.allFinite()) p.f = std::numeric_limits<double>::infinity();
        return p;
    }
    int count() const { return count_; }

private:
    const Objective& f_;
    int count_ = 0;
};

// Backtracking Armijo search along `dir`; returns false if no acceptable step.
bool line_search(Tracker& tr, const Point& cur, const Eigen::VectorXd& dir, Point& next)
{
    const double slope = cur.g.dot(dir);
    if (!(slope < 0.0)) return false;
    double step = 1.0;
    for (int k = 0; k < 60; ++k) {
        next = tr.eval(cur.x + step * dir);
        if (next.f <= cur.f + 1e-4 * step * slope) return true;
        // Flat region at round-off level: accept if the gradient shrank.
        if (next.f <= cur.f + noise(cur.f) && inf_norm(next.g) < inf_norm(cur.g)) return true;
        step *= 0.5;
    }
    return false;
}

}  // namespace

Result minimize(const Objective& f, Eigen::VectorXd x0, const Options& opts)
{
    Tracker tr(f);
    Point cur = tr.eval(x0);
    Result res;
    const Eigen::Index n = x0.size();

    Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    int iter = 0;
    int resets = 0;

    while (std::isfinite(cur.f) && iter < opts.max_iter && inf_norm(cur.g) >= opts.grad_tol) {
        ++iter;
        Eigen::VectorXd dir = -inv_h * cur.g;
        if (!scaled) {
            const double len = dir.norm();
            if (len > 1.0) dir /= len;
        }
        Point next;
        if (!line_search(tr, cur, dir, next)) {
            if (resets++ > 2) break;
            inv_h.setIdentity();
            scaled = false;
            continue;
        }
        const Eigen::VectorXd s = next.x - cur.x;
        const Eigen::VectorXd y = next.g - cur.g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                inv_h *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = inv_h * y;
            inv_h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
        }
        cur = std::move(next);
    }

    // Newton refinement: quadratic convergence to the tight gradient tolerance.
    for (int k = 0; k < opts.newton_steps && std::isfinite(cur.f) && inf_norm(cur.g) >= opts.grad_tol; ++k) {
        Eigen::MatrixXd h = finite_difference_hessian(f, cur.x);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
        const double min_ev = eig.eigenvalues().minCoeff();
        if (min_ev <= 1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
            h.diagonal().array() += std::abs(min_ev) + 1e-6 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
        }
        const Eigen::VectorXd dir = -h.ldlt().solve(cur.g);
        Point next;
        if (!line_search(tr, cur, dir, next)) break;
        cur = std::move(next);
        ++iter;
    }

    res.x = cur.x;
    res.value = cur.f;
    res.gradient = cur.g;
    res.gradient_norm = inf_norm(cur.g);
    res.iterations = iter;
    res.evaluations = tr.count();
    res.converged = std::isfinite(cur.f) && res.gradient_norm < opts.grad_tol;
    return res;
}

Eigen::MatrixXd finite_difference_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step)
{
    const Eigen::Index n = x.size();
    Eigen::MatrixXd h(n, n);
    Eigen::VectorXd gp(n), gm(n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double step = rel_step * std::max(1.0, std::abs(x(j)));
        xp(j) = x(j) + step;
        f(xp, &gp);
        xp(j) = x(j) - step;
        f(xp, &gm);
        xp(j) = x(j);
        h.col(j) = (gp - gm) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

Eigen::VectorXd finite_difference_gradient(const Objective& f, const Eigen::VectorXd& x, double step)
{
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        xp(j) = x(j) + step;
        const double fp = f(xp, nullptr);
        xp(j) = x(j) - step;
        const double fm = f(xp, nullptr);
        xp(j) = x(j);
        g(j) = (fp - fm) / (2.0 * step);
    }
    return g;
}

}  // namespace agemix::optim
