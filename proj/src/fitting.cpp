#include "sqfit/fitting.hpp"

#include "sqfit/error.hpp"

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sqfit {

namespace {

using Eigen::VectorXd;

constexpr std::size_t kRigidCount = 11;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool has_extra(FitMode mode) { return mode == FitMode::Taper || mode == FitMode::Bend; }

double median_of(std::vector<double> values) {
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    double m = values[mid];
    if (values.size() % 2 == 0) {
        const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lower);
    }
    return m;
}

Vec3 centroid_of(std::span<const Vec3> points) {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return c / static_cast<double>(points.size());
}

/// Eigenvectors of the covariance as columns, largest variance first, with
/// determinant +1.
Mat3 principal_axes(std::span<const Vec3> points, const Vec3& centre) {
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points) {
        const Vec3 d = p - centre;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov / static_cast<double>(points.size()));
    Mat3 axes;
    for (int i = 0; i < 3; ++i) axes.col(i) = eig.eigenvectors().col(2 - i);
    if (axes.determinant() < 0) axes.col(2) = -axes.col(2);
    return axes;
}

void apply_fixed_values(VectorXd& theta, FitMode mode) {
    switch (mode) {
        case FitMode::Sphere:
        case FitMode::Ellipsoid:
            theta[0] = 1.0;
            theta[1] = 1.0;
            break;
        case FitMode::Cylinder:
            theta[0] = 0.01;
            theta[1] = 1.0;
            break;
        default: break;
    }
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(FitMode mode) {
    switch (mode) {
        case FitMode::Rigid: return "rigid";
        case FitMode::Taper: return "taper";
        case FitMode::Bend: return "bend";
        case FitMode::Sphere: return "sphere";
        case FitMode::Cylinder: return "cylinder";
        case FitMode::Ellipsoid: return "ellipsoid";
    }
    return "unknown";
}

std::optional<FitMode> parse_fit_mode(std::string_view name) {
    for (auto mode : {FitMode::Rigid, FitMode::Taper, FitMode::Bend, FitMode::Sphere, FitMode::Cylinder,
                      FitMode::Ellipsoid})
        if (to_string(mode) == name) return mode;
    return std::nullopt;
}

std::string_view to_string(FitStatus status) {
    return status == FitStatus::Converged ? "converged" : "max-iters";
}

void validate(const FitConfig& c) {
    if (!(c.lambda > 0) || !std::isfinite(c.lambda)) throw Error(Errc::InvalidConfig, "lambda must be positive");
    if (!(c.outlier_weight >= 0 && c.outlier_weight < 1))
        throw Error(Errc::InvalidConfig, "outlier weight must lie in [0, 1)");
    if (!(c.outer_tol > 0)) throw Error(Errc::InvalidConfig, "outer tolerance must be positive");
    if (c.max_outer_iters <= 0) throw Error(Errc::InvalidConfig, "max outer iterations must be positive");
    if (!(c.sigma_floor > 0)) throw Error(Errc::InvalidConfig, "sigma floor must be positive");
}

NormalizedCloud normalize_cloud(std::span<const Vec3> points) {
    if (points.size() < kMinFitPoints)
        throw Error(Errc::TooFewPoints, "fitting needs at least 13 points, got " + std::to_string(points.size()));
    for (const auto& p : points)
        if (!p.allFinite()) throw Error(Errc::DegenerateCloud, "cloud contains non-finite coordinates");

    NormalizedCloud out;
    out.record.offset = centroid_of(points);
    double max_abs = 0.0;
    for (const auto& p : points) max_abs = std::max(max_abs, (p - out.record.offset).cwiseAbs().maxCoeff());
    if (!(max_abs > 0)) throw Error(Errc::DegenerateCloud, "all points coincide");
    out.record.scale = 1.0 / max_abs;
    out.points.reserve(points.size());
    for (const auto& p : points) out.points.push_back(out.record.scale * (p - out.record.offset));

    const Mat3 axes = principal_axes(out.points, Vec3::Zero());
    Vec3 lo = Vec3::Constant(HUGE_VAL);
    Vec3 hi = Vec3::Constant(-HUGE_VAL);
    for (const auto& p : out.points) {
        const Vec3 q = axes.transpose() * p;
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
    }
    if (((hi - lo).array() < 1e-9).any()) throw Error(Errc::DegenerateCloud, "cloud is planar or collinear");
    return out;
}

SuperquadricModel denormalize(const SuperquadricModel& model, const NormalizationRecord& record) {
    SuperquadricModel out = model;
    out.size = model.size / record.scale;
    out.translation = model.translation / record.scale + record.offset;
    if (auto* bend = std::get_if<Bend>(&out.deformation)) bend->kappa *= record.scale;
    return out;
}

SuperquadricModel normalize(const SuperquadricModel& model, const NormalizationRecord& record) {
    SuperquadricModel out = model;
    out.size = model.size * record.scale;
    out.translation = (model.translation - record.offset) * record.scale;
    if (auto* bend = std::get_if<Bend>(&out.deformation)) bend->kappa /= record.scale;
    return out;
}

std::size_t parameter_count(FitMode mode) { return has_extra(mode) ? kRigidCount + 2 : kRigidCount; }

VectorXd model_to_theta(const SuperquadricModel& m, FitMode mode) {
    VectorXd t(parameter_count(mode));
    t << m.eps1, m.eps2, m.size, m.euler, m.translation, VectorXd::Zero(t.size() - kRigidCount);
    if (mode == FitMode::Taper) {
        const auto taper = std::get_if<Taper>(&m.deformation);
        if (taper) t.tail(2) << taper->kx, taper->ky;
    } else if (mode == FitMode::Bend) {
        const auto bend = std::get_if<Bend>(&m.deformation);
        t.tail(2) << (bend ? bend->kappa : Bend{}.kappa), (bend ? bend->alpha : 0.0);
    }
    return t;
}

SuperquadricModel theta_to_model(const VectorXd& t, FitMode mode) {
    SuperquadricModel m;
    m.eps1 = t[0];
    m.eps2 = t[1];
    m.size = t.segment<3>(2);
    m.euler = t.segment<3>(5);
    m.translation = t.segment<3>(8);
    if (mode == FitMode::Taper) m.deformation = Taper{t[11], t[12]};
    else if (mode == FitMode::Bend) m.deformation = Bend{t[11], t[12]};
    return m;
}

std::vector<bool> fixed_parameters(FitMode mode) {
    std::vector<bool> fixed(parameter_count(mode), false);
    if (mode == FitMode::Sphere || mode == FitMode::Cylinder || mode == FitMode::Ellipsoid) fixed[0] = fixed[1] = true;
    return fixed;
}

ParameterBounds parameter_bounds(FitMode mode, std::span<const Vec3> points) {
    double max_abs = 0.0;
    for (const auto& p : points) max_abs = std::max(max_abs, p.cwiseAbs().maxCoeff());
    const double upper = 4.0 * max_abs;
    const double size_lo = mode == FitMode::Taper ? 1e-3 : 1e-5;
    const auto n = static_cast<Eigen::Index>(parameter_count(mode));
    ParameterBounds b{VectorXd(n), VectorXd(n)};
    b.lower.head(kRigidCount) << 1e-4, 1e-4, size_lo, size_lo, size_lo, -kTwoPi, -kTwoPi, -kTwoPi, -upper, -upper,
        -upper;
    b.upper.head(kRigidCount) << 2.0, 2.0, upper, upper, upper, kTwoPi, kTwoPi, kTwoPi, upper, upper, upper;
    if (mode == FitMode::Taper) {
        b.lower.tail(2) << -1.0, -1.0;
        b.upper.tail(2) << 1.0, 1.0;
    } else if (mode == FitMode::Bend) {
        b.lower.tail(2) << 1e-4, 0.0;
        b.upper.tail(2) << upper, std::numbers::pi / 2;
    }
    return b;
}

VectorXd pca_initialize(std::span<const Vec3> points, FitMode mode, int axis_assignment) {
    if (points.size() < 3) throw Error(Errc::DegenerateCloud, "too few points for a principal frame");
    const Vec3 centre = centroid_of(points);
    const Mat3 axes = principal_axes(points, centre);
    const int k = ((axis_assignment % 3) + 3) % 3;
    Mat3 rot;
    rot.col(0) = axes.col((k + 1) % 3);
    rot.col(1) = axes.col((k + 2) % 3);
    rot.col(2) = axes.col(k);

    std::vector<double> coords[3];
    for (auto& c : coords) c.reserve(points.size());
    for (const auto& p : points) {
        const Vec3 q = rot.transpose() * (p - centre);
        for (int i = 0; i < 3; ++i) coords[i].push_back(std::abs(q[i]));
    }
    Vec3 size;
    for (int i = 0; i < 3; ++i) size[i] = std::max(median_of(coords[i]), 1e-3);

    SuperquadricModel m;
    m.eps1 = mode == FitMode::Bend ? 0.01 : 1.0;
    m.eps2 = 1.0;
    m.size = size;
    m.euler = euler_from_rotation(rot);
    m.translation = centre;
    if (mode == FitMode::Taper) m.deformation = Taper{0.0, 0.0};
    else if (mode == FitMode::Bend) m.deformation = Bend{0.1, std::numbers::pi / 4};
    return model_to_theta(m, mode);
}

double bounding_box_volume(std::span<const Vec3> points) {
    Vec3 lo = Vec3::Constant(HUGE_VAL);
    Vec3 hi = Vec3::Constant(-HUGE_VAL);
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).prod();
}

std::vector<double> raw_membership(std::span<const double> residuals, double sigma2, double lambda) {
    const double m = static_cast<double>(residuals.size());
    const double base = -(3.0 / lambda) * std::log(sigma2) - std::log(m) - 1.0;
    std::vector<double> u(residuals.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = residuals[i] * residuals[i] / sigma2;
        u[i] = std::exp(-d / lambda + base);
    }
    return u;
}

std::vector<double> update_membership(std::span<const double> residuals, double sigma2,
                                      const MembershipParams& params) {
    std::vector<double> u(residuals.size(), 1.0);
    const double w = params.outlier_weight;
    if (w == 0.0) return u;
    const double m = static_cast<double>(residuals.size());
    const double log_sigma2 = std::log(sigma2);
    const double log_p = std::log(w) + 0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + 3.0 * log_sigma2) -
                         std::log1p(-w) - std::log(params.volume);
    const double log_a_base = -(3.0 / params.lambda) * log_sigma2 - std::log(m) - 1.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = residuals[i] * residuals[i] / sigma2;
        const double diff = log_p - (-d / params.lambda + log_a_base);
        double value;
        if (diff > 0) {
            const double e = std::exp(-diff);
            value = e / (1.0 + e);
        } else {
            value = 1.0 / (1.0 + std::exp(diff));
        }
        u[i] = std::max(value, DBL_MIN);
    }
    return u;
}

double update_sigma(std::span<const double> u, std::span<const double> residuals, double floor) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        num += u[i] * residuals[i] * residuals[i];
        den += u[i];
    }
    const double s = num / (3.0 * den);
    return std::isfinite(s) ? std::max(s, floor) : floor;
}

double objective(std::span<const double> u, std::span<const double> residuals, double sigma2, double lambda) {
    const double log_m = std::log(static_cast<double>(u.size()));
    const double log_det = 3.0 * std::log(sigma2);
    double total = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = residuals[i] * residuals[i] / sigma2;
        total += u[i] * d + u[i] * log_det + lambda * u[i] * (std::log(u[i]) + log_m);
    }
    return total;
}

VectorXd update_theta(const VectorXd& theta, std::span<const double> u, double sigma2, ResidualEvaluator& evaluator,
                      FitMode mode, const ParameterBounds& bounds, const SolverOptions& options,
                      SolverReport* report) {
    const auto fixed = fixed_parameters(mode);
    std::vector<Eigen::Index> free;
    for (std::size_t i = 0; i < fixed.size(); ++i)
        if (!fixed[i]) free.push_back(static_cast<Eigen::Index>(i));
    const auto nf = static_cast<Eigen::Index>(free.size());

    std::vector<double> weights(u.size());
    const double inv_sigma = 1.0 / std::sqrt(sigma2);
    for (std::size_t i = 0; i < u.size(); ++i) weights[i] = std::sqrt(u[i]) * inv_sigma;

    std::vector<double> scratch(evaluator.size());
    auto expand = [&](const VectorXd& reduced) {
        VectorXd full = theta;
        for (Eigen::Index k = 0; k < nf; ++k) full[free[static_cast<std::size_t>(k)]] = reduced[k];
        return full;
    };
    BoundedProblem problem;
    problem.residual = [&](const VectorXd& reduced) {
        evaluator.radial(theta_to_model(expand(reduced), mode), scratch);
        VectorXd r(static_cast<Eigen::Index>(scratch.size()));
        for (std::size_t i = 0; i < scratch.size(); ++i) r[static_cast<Eigen::Index>(i)] = weights[i] * scratch[i];
        return r;
    };
    problem.lower.resize(nf);
    problem.upper.resize(nf);
    problem.theta0.resize(nf);
    for (Eigen::Index k = 0; k < nf; ++k) {
        const auto j = free[static_cast<std::size_t>(k)];
        problem.lower[k] = bounds.lower[j];
        problem.upper[k] = bounds.upper[j];
        problem.theta0[k] = theta[j];
    }

    SolverReport result;
    try {
        result = minimize(problem, options);
    } catch (const Error& e) {
        if (e.code() != Errc::NonFiniteResidual) throw;
        spdlog::debug("non-finite residual at the incoming parameters; retrying from a perturbed point");
        problem.theta0.array() += 1e-6;
        result = minimize(problem, options);
    }
    if (report) *report = result;
    return expand(result.theta);
}

InitRun run_from(std::span<const Vec3> points, const VectorXd& theta0, const FitConfig& config) {
    validate(config);
    const ParameterBounds bounds = parameter_bounds(config.mode, points);
    const MembershipParams mp{config.lambda, config.outlier_weight, bounding_box_volume(points)};
    ResidualEvaluator evaluator(points);

    InitRun run;
    VectorXd theta = theta0;
    apply_fixed_values(theta, config.mode);
    theta = clamp_interior(theta, bounds.lower, bounds.upper);
    apply_fixed_values(theta, config.mode);
    double sigma2 = std::max(std::cbrt(mp.volume), config.sigma_floor);
    std::vector<double> residuals = evaluator.radial(theta_to_model(theta, config.mode));
    std::vector<double> u;

    for (int it = 0; it < config.max_outer_iters; ++it) {
        u = update_membership(residuals, sigma2, mp);
        SolverReport report;
        theta = update_theta(theta, u, sigma2, evaluator, config.mode, bounds, config.solver, &report);
        run.bounds_respected = run.bounds_respected && report.bounds_respected;
        evaluator.radial(theta_to_model(theta, config.mode), residuals);
        sigma2 = update_sigma(u, residuals, config.sigma_floor);
        const double loss = objective(u, residuals, sigma2, config.lambda);
        run.loss_trace.push_back(loss);
        spdlog::debug("outer {}: loss {:.12g} sigma2 {:.6g} solver {} iterations ({})", it, loss, sigma2,
                      report.iterations, to_string(report.termination));
        if (run.loss_trace.size() >= 2) {
            const double prev = run.loss_trace[run.loss_trace.size() - 2];
            if (std::abs(loss - prev) <= config.outer_tol * std::abs(prev)) {
                run.status = FitStatus::Converged;
                break;
            }
        }
    }
    run.state = FitState{u, sigma2, theta, run.loss_trace.empty() ? 0.0 : run.loss_trace.back()};
    run.mean_residual = mean_of(residuals);
    return run;
}

FitResult fit(std::span<const Vec3> points, const FitConfig& config) {
    validate(config);
    NormalizedCloud cloud = normalize_cloud(points);

    FitResult result;
    result.normalization = cloud.record;
    const int inits = config.multi_init ? 3 : 1;
    for (int k = 0; k < inits; ++k) {
        InitRun run = run_from(cloud.points, pca_initialize(cloud.points, config.mode, k), config);
        run.axis_assignment = k;
        result.runs.push_back(std::move(run));
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < result.runs.size(); ++k)
        if (result.runs[k].mean_residual < result.runs[best].mean_residual) best = k;
    const InitRun& chosen = result.runs[best];

    SuperquadricModel model = theta_to_model(chosen.state.theta, config.mode);
    if (config.mode == FitMode::Sphere) {
        model.size.setConstant(model.size.mean());
    } else if (config.mode == FitMode::Cylinder) {
        const double radius = 0.5 * (model.size.x() + model.size.y());
        model.size.x() = model.size.y() = radius;
    }
    result.normalized_model = model;
    result.model = denormalize(model, cloud.record);
    result.final_state = chosen.state;
    result.loss_trace = chosen.loss_trace;
    result.status = chosen.status;
    result.chosen_init = chosen.axis_assignment;
    return result;
}

}  // namespace sqfit
