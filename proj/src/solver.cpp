#include "sqfit/solver.hpp"

#include "sqfit/error.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace sqfit {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(const VectorXd& v) { return v.allFinite(); }

bool in_bounds(const VectorXd& x, const VectorXd& lb, const VectorXd& ub) {
    return ((x.array() >= lb.array()) && (x.array() <= ub.array())).all();
}

/// Coleman-Li scaling: distance to the bound the anti-gradient points at.
void cl_scaling(const VectorXd& x, const VectorXd& g, const VectorXd& lb, const VectorXd& ub, VectorXd& v,
                VectorXd& dv) {
    const auto n = x.size();
    v.setOnes(n);
    dv.setZero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (g[i] < 0 && std::isfinite(ub[i])) {
            v[i] = ub[i] - x[i];
            dv[i] = -1;
        } else if (g[i] > 0 && std::isfinite(lb[i])) {
            v[i] = x[i] - lb[i];
            dv[i] = 1;
        }
    }
}

struct BoundHit {
    double step = kInf;
    Eigen::VectorXi hits;
};

BoundHit step_size_to_bound(const VectorXd& x, const VectorXd& s, const VectorXd& lb, const VectorXd& ub) {
    const auto n = x.size();
    VectorXd steps = VectorXd::Constant(n, kInf);
    for (Eigen::Index i = 0; i < n; ++i)
        if (s[i] != 0) steps[i] = std::max((lb[i] - x[i]) / s[i], (ub[i] - x[i]) / s[i]);
    BoundHit out;
    out.step = steps.minCoeff();
    out.hits = Eigen::VectorXi::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (steps[i] == out.step) out.hits[i] = s[i] > 0 ? 1 : (s[i] < 0 ? -1 : 0);
    return out;
}

/// Parameters t1 <= t2 where |x + t s| = delta.
std::pair<double, double> intersect_trust_region(const VectorXd& x, const VectorXd& s, double delta) {
    const double a = s.squaredNorm();
    const double b = x.dot(s);
    const double c = x.squaredNorm() - delta * delta;
    if (a == 0.0 || c > 0.0) return {0.0, 0.0};
    const double d = std::sqrt(b * b - a * c);
    const double q = -(b + std::copysign(d, b));
    const double t1 = q / a;
    const double t2 = c / q;
    return t1 < t2 ? std::pair{t1, t2} : std::pair{t2, t1};
}

double evaluate_quadratic(const MatrixXd& j, const VectorXd& g, const VectorXd& s, const VectorXd& diag) {
    const VectorXd js = j * s;
    const double q = js.squaredNorm() + s.cwiseProduct(diag).dot(s);
    return 0.5 * q + s.dot(g);
}

struct Quadratic1d {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

/// Coefficients of f(t) = a t^2 + b t + c along s0 + t s.
Quadratic1d build_quadratic_1d(const MatrixXd& j, const VectorXd& g, const VectorXd& s, const VectorXd& diag,
                               const VectorXd* s0) {
    const VectorXd v = j * s;
    Quadratic1d q;
    q.a = 0.5 * (v.squaredNorm() + s.cwiseProduct(diag).dot(s));
    q.b = g.dot(s);
    if (s0) {
        const VectorXd u = j * *s0;
        q.b += u.dot(v) + s0->cwiseProduct(diag).dot(s);
        q.c = 0.5 * u.squaredNorm() + g.dot(*s0) + 0.5 * s0->cwiseProduct(diag).dot(*s0);
    }
    return q;
}

std::pair<double, double> minimize_quadratic_1d(const Quadratic1d& q, double lo, double hi) {
    double ts[3] = {lo, hi, lo};
    int count = 2;
    if (q.a != 0.0) {
        const double extremum = -0.5 * q.b / q.a;
        if (lo < extremum && extremum < hi) ts[count++] = extremum;
    }
    double best_t = ts[0];
    double best_y = kInf;
    for (int i = 0; i < count; ++i) {
        const double y = ts[i] * (q.a * ts[i] + q.b) + q.c;
        if (y < best_y) {
            best_y = y;
            best_t = ts[i];
        }
    }
    return {best_t, best_y};
}

/// Solution of min |J p + f| s.t. |p| <= delta from the SVD of J, by the
/// secant iteration on the Levenberg parameter. alpha is updated in place.
VectorXd solve_trust_region(Eigen::Index rows, const VectorXd& uf, const VectorXd& s, const MatrixXd& v,
                            double delta, double& alpha) {
    const auto n = s.size();
    const VectorXd suf = s.cwiseProduct(uf);
    const double threshold = std::numeric_limits<double>::epsilon() * static_cast<double>(rows) * s[0];
    const bool full_rank = s[n - 1] > threshold;
    if (full_rank) {
        const VectorXd p = -v * uf.cwiseQuotient(s);
        if (p.norm() <= delta) {
            alpha = 0.0;
            return p;
        }
    }
    auto phi_and_derivative = [&](double a) {
        const VectorXd denom = s.array().square() + a;
        const double p_norm = suf.cwiseQuotient(denom).norm();
        const double phi = p_norm - delta;
        const double phi_prime = -(suf.array().square() / denom.array().cube()).sum() / p_norm;
        return std::pair{phi, phi_prime};
    };
    double alpha_upper = suf.norm() / delta;
    double alpha_lower = 0.0;
    if (full_rank) {
        const auto [phi, phi_prime] = phi_and_derivative(0.0);
        alpha_lower = -phi / phi_prime;
    }
    if (!full_rank && alpha == 0.0) alpha = std::max(0.001 * alpha_upper, std::sqrt(alpha_lower * alpha_upper));
    for (int it = 0; it < 10; ++it) {
        if (alpha < alpha_lower || alpha > alpha_upper)
            alpha = std::max(0.001 * alpha_upper, std::sqrt(alpha_lower * alpha_upper));
        const auto [phi, phi_prime] = phi_and_derivative(alpha);
        if (phi < 0) alpha_upper = alpha;
        const double ratio = phi / phi_prime;
        alpha_lower = std::max(alpha_lower, alpha - ratio);
        alpha -= (phi + delta) * ratio / delta;
        if (std::abs(phi) < 0.01 * delta) break;
    }
    VectorXd p = -v * suf.cwiseQuotient((s.array().square() + alpha).matrix());
    p *= delta / p.norm();
    return p;
}

struct Step {
    VectorXd step;
    VectorXd step_h;
    double predicted_reduction = 0.0;
};

/// Chooses between the truncated trust-region step, its reflection off the
/// first bound hit, and the constrained anti-gradient step.
Step select_step(const VectorXd& x, const MatrixXd& j_h, const VectorXd& diag_h, const VectorXd& g_h, VectorXd p,
                 VectorXd p_h, const VectorXd& d, double delta, const VectorXd& lb, const VectorXd& ub,
                 double theta) {
    if (in_bounds(x + p, lb, ub)) {
        const double value = evaluate_quadratic(j_h, g_h, p_h, diag_h);
        return {p, p_h, -value};
    }
    const BoundHit to_hit = step_size_to_bound(x, p, lb, ub);
    VectorXd r_h = p_h;
    for (Eigen::Index i = 0; i < r_h.size(); ++i)
        if (to_hit.hits[i] != 0) r_h[i] = -r_h[i];
    VectorXd r = d.cwiseProduct(r_h);

    p *= to_hit.step;
    p_h *= to_hit.step;
    const VectorXd x_on_bound = x + p;

    const double to_tr = intersect_trust_region(p_h, r_h, delta).second;
    const double to_bound = step_size_to_bound(x_on_bound, r, lb, ub).step;
    double r_stride = std::min(to_bound, to_tr);
    double r_lo = 0.0;
    double r_hi = -1.0;
    if (r_stride > 0) {
        r_lo = (1 - theta) * to_hit.step / r_stride;
        r_hi = r_stride == to_bound ? theta * to_bound : to_tr;
    }
    double r_value = kInf;
    if (r_lo <= r_hi) {
        const Quadratic1d q = build_quadratic_1d(j_h, g_h, r_h, diag_h, &p_h);
        const auto [t, value] = minimize_quadratic_1d(q, r_lo, r_hi);
        r_h = p_h + t * r_h;
        r = d.cwiseProduct(r_h);
        r_value = value;
    }

    p *= theta;
    p_h *= theta;
    const double p_value = evaluate_quadratic(j_h, g_h, p_h, diag_h);

    VectorXd ag_h = -g_h;
    VectorXd ag = d.cwiseProduct(ag_h);
    const double ag_to_tr = delta / ag_h.norm();
    const double ag_to_bound = step_size_to_bound(x, ag, lb, ub).step;
    const double ag_max = ag_to_bound < ag_to_tr ? theta * ag_to_bound : ag_to_tr;
    const Quadratic1d q = build_quadratic_1d(j_h, g_h, ag_h, diag_h, nullptr);
    const auto [ag_stride, ag_value] = minimize_quadratic_1d(q, 0.0, ag_max);
    ag_h *= ag_stride;
    ag *= ag_stride;

    if (p_value < r_value && p_value < ag_value) return {p, p_h, -p_value};
    if (r_value < p_value && r_value < ag_value) return {r, r_h, -r_value};
    return {ag, ag_h, -ag_value};
}

VectorXd make_strictly_feasible(VectorXd x, const VectorXd& lb, const VectorXd& ub) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] <= lb[i]) x[i] = std::nextafter(lb[i], ub[i]);
        else if (x[i] >= ub[i]) x[i] = std::nextafter(ub[i], lb[i]);
        if (x[i] < lb[i] || x[i] > ub[i]) x[i] = 0.5 * (lb[i] + ub[i]);
    }
    return x;
}

void jac_scale(const MatrixXd& j, VectorXd& scale_inv, bool first) {
    VectorXd norms = j.colwise().norm().transpose();
    if (first) {
        for (Eigen::Index i = 0; i < norms.size(); ++i)
            if (norms[i] == 0) norms[i] = 1;
        scale_inv = norms;
    } else {
        scale_inv = scale_inv.cwiseMax(norms);
    }
}

void validate(const BoundedProblem& p) {
    const auto n = p.theta0.size();
    if (n == 0 || p.lower.size() != n || p.upper.size() != n || !p.residual)
        throw Error(Errc::InvalidProblem, "parameter, bound and residual dimensions disagree");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(p.lower[i] < p.upper[i])) throw Error(Errc::InvalidProblem, "lower bound must be below upper bound");
}

}  // namespace

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::Gradient: return "gradient";
        case Termination::Step: return "step";
        case Termination::CostChange: return "cost-change";
        case Termination::MaxIterations: return "max-iter";
    }
    return "unknown";
}

VectorXd clamp_interior(const VectorXd& theta, const VectorXd& lower, const VectorXd& upper) {
    VectorXd out = theta;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double margin = 1e-6 * (upper[i] - lower[i]);
        const double lo = lower[i] + margin;
        const double hi = upper[i] - margin;
        if (!std::isfinite(out[i])) out[i] = 0.5 * (lower[i] + upper[i]);
        out[i] = std::clamp(out[i], lo, hi);
    }
    return out;
}

MatrixXd finite_difference_jacobian(const ResidualFn& fn, const VectorXd& theta, const VectorXd& lower,
                                    const VectorXd& upper) {
    const auto n = theta.size();
    MatrixXd jac;
    VectorXd probe = theta;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = std::max(1e-6, 1e-6 * std::abs(theta[i]));
        const double room_up = upper[i] - theta[i];
        const double room_down = theta[i] - lower[i];
        VectorXd column;
        if (room_up >= h && room_down >= h) {
            probe[i] = theta[i] + h;
            const VectorXd plus = fn(probe);
            probe[i] = theta[i] - h;
            const VectorXd minus = fn(probe);
            column = (plus - minus) / (2.0 * h);
        } else {
            const double sign = room_up >= room_down ? 1.0 : -1.0;
            const double step = std::min(h, std::max(room_up, room_down));
            probe[i] = theta[i] + sign * step;
            const VectorXd moved = fn(probe);
            probe[i] = theta[i];
            const VectorXd base = fn(probe);
            column = sign * (moved - base) / step;
        }
        probe[i] = theta[i];
        if (jac.size() == 0) jac.resize(column.size(), n);
        jac.col(i) = column;
    }
    return jac;
}

SolverReport minimize(const BoundedProblem& problem, const SolverOptions& options) {
    validate(problem);
    const VectorXd& lb = problem.lower;
    const VectorXd& ub = problem.upper;
    const auto n = problem.theta0.size();
    const int max_evaluations = options.max_evaluations > 0 ? options.max_evaluations : 10 * options.max_iterations;

    SolverReport report;
    VectorXd x = clamp_interior(problem.theta0, lb, ub);
    VectorXd f = problem.residual(x);
    report.evaluations = 1;
    if (!all_finite(f)) throw Error(Errc::NonFiniteResidual, "residual is not finite at the initial point");
    if (f.size() < n) throw Error(Errc::InvalidProblem, "fewer residuals than parameters");
    const auto m = f.size();

    double cost = 0.5 * f.squaredNorm();
    report.initial_cost = cost;
    report.cost_trace.push_back(cost);

    MatrixXd j = finite_difference_jacobian(problem.residual, x, lb, ub);
    VectorXd g = j.transpose() * f;
    VectorXd scale_inv;
    jac_scale(j, scale_inv, true);
    VectorXd scale = scale_inv.cwiseInverse();

    VectorXd v, dv;
    cl_scaling(x, g, lb, ub, v, dv);
    for (Eigen::Index i = 0; i < n; ++i)
        if (dv[i] != 0) v[i] *= scale_inv[i];
    double delta = x.cwiseProduct(scale_inv).cwiseQuotient(v.cwiseSqrt()).norm();
    if (delta == 0.0) delta = 1.0;

    double alpha = 0.0;
    std::optional<Termination> status;
    int iteration = 0;

    while (true) {
        cl_scaling(x, g, lb, ub, v, dv);
        const double g_norm = g.cwiseProduct(v).lpNorm<Eigen::Infinity>();
        if (g_norm < options.gtol) status = Termination::Gradient;
        if (status || report.evaluations >= max_evaluations || iteration >= options.max_iterations) break;

        for (Eigen::Index i = 0; i < n; ++i)
            if (dv[i] != 0) v[i] *= scale_inv[i];
        const VectorXd d = v.cwiseSqrt().cwiseProduct(scale);
        const VectorXd diag_h = g.cwiseProduct(dv).cwiseProduct(scale);
        const VectorXd g_h = d.cwiseProduct(g);

        MatrixXd j_aug = MatrixXd::Zero(m + n, n);
        j_aug.topRows(m) = j * d.asDiagonal();
        j_aug.bottomRows(n).diagonal() = diag_h.cwiseSqrt();
        VectorXd f_aug = VectorXd::Zero(m + n);
        f_aug.head(m) = f;
        const auto j_h = j_aug.topRows(m);
        const MatrixXd j_h_dense = j_h;

        Eigen::HouseholderQR<MatrixXd> qr(j_aug);
        const MatrixXd r_factor = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
        const VectorXd qtf = (qr.householderQ().transpose() * f_aug).head(n);
        Eigen::JacobiSVD<MatrixXd> svd(r_factor, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const VectorXd sv = svd.singularValues();
        const MatrixXd vmat = svd.matrixV();
        const VectorXd uf = svd.matrixU().transpose() * qtf;

        const double theta = std::max(0.995, 1.0 - g_norm);
        double actual_reduction = -1.0;
        bool accepted = false;
        VectorXd x_new, f_new;
        double cost_new = cost;
        double step_norm = 0.0;
        while (!accepted && report.evaluations < max_evaluations) {
            const VectorXd p_h = solve_trust_region(m + n, uf, sv, vmat, delta, alpha);
            const VectorXd p = d.cwiseProduct(p_h);
            const Step step = select_step(x, j_h_dense, diag_h, g_h, p, p_h, d, delta, lb, ub, theta);
            x_new = make_strictly_feasible(x + step.step, lb, ub);
            if (!in_bounds(x_new, lb, ub)) report.bounds_respected = false;
            f_new = problem.residual(x_new);
            ++report.evaluations;
            const double step_h_norm = step.step_h.norm();
            if (!all_finite(f_new)) {
                delta = 0.25 * step_h_norm;
                continue;
            }
            cost_new = 0.5 * f_new.squaredNorm();
            actual_reduction = cost - cost_new;
            const double predicted = step.predicted_reduction;
            double ratio;
            if (predicted > 0) ratio = actual_reduction / predicted;
            else if (predicted == 0 && actual_reduction == 0) ratio = 1.0;
            else ratio = 0.0;
            double delta_new = delta;
            if (ratio < 0.25) delta_new = 0.25 * step_h_norm;
            else if (ratio > 0.75 && step_h_norm > 0.95 * delta) delta_new = 2.0 * delta;

            accepted = actual_reduction > 0 && ratio > 1e-4;
            step_norm = (x_new - x).norm();
            const bool ftol_hit = actual_reduction < options.ftol * cost && ratio > 0.25;
            const bool xtol_hit = step_norm < options.xtol * (options.xtol + x.norm());
            if (ftol_hit || xtol_hit) {
                status = ftol_hit ? Termination::CostChange : Termination::Step;
                break;
            }
            if (delta_new > 0) alpha *= delta / delta_new;
            delta = delta_new;
            if (!(delta > 0)) {
                status = Termination::Step;
                break;
            }
        }
        if (accepted || (status && actual_reduction > 0)) {
            x = x_new;
            f = f_new;
            cost = cost_new;
            report.cost_trace.push_back(cost);
            j = finite_difference_jacobian(problem.residual, x, lb, ub);
            g = j.transpose() * f;
            jac_scale(j, scale_inv, false);
            scale = scale_inv.cwiseInverse();
        }
        ++iteration;
    }

    report.theta = x;
    report.cost = cost;
    report.iterations = iteration;
    report.termination = status.value_or(Termination::MaxIterations);
    return report;
}

}  // namespace sqfit
