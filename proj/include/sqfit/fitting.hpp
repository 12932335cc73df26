#pragma once

// Superquadric fitting by alternating updates of a per-point membership u,
// the model parameters theta (bounded least squares) and an isotropic
// variance sigma^2.
//
// Parameter vector layout:
//   [eps1, eps2, ax, ay, az, euler0, euler1, euler2, tx, ty, tz]
// followed by (kx, ky) for Taper or (kappa, alpha) for Bend.

#include "sqfit/geometry.hpp"
#include "sqfit/residuals.hpp"
#include "sqfit/solver.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace sqfit {

enum class FitMode { Rigid, Taper, Bend, Sphere, Cylinder, Ellipsoid };

std::string_view to_string(FitMode mode);
std::optional<FitMode> parse_fit_mode(std::string_view name);

struct FitConfig {
    double lambda = 3.0;
    double outlier_weight = 0.1;
    FitMode mode = FitMode::Rigid;
    double outer_tol = 1e-3;
    int max_outer_iters = 50;
    bool multi_init = true;
    double sigma_floor = 1e-12;
    SolverOptions solver{};
};

/// Throws Errc::InvalidConfig.
void validate(const FitConfig& config);

/// normalized = scale * (original - offset).
struct NormalizationRecord {
    double scale = 1.0;
    Vec3 offset = Vec3::Zero();
};

struct NormalizedCloud {
    std::vector<Vec3> points;
    NormalizationRecord record;
};

inline constexpr std::size_t kMinFitPoints = 13;

/// Centres on the centroid and scales so the largest absolute coordinate is
/// 1. Throws Errc::TooFewPoints below kMinFitPoints and
/// Errc::DegenerateCloud when any principal extent is below 1e-9.
NormalizedCloud normalize_cloud(std::span<const Vec3> points);

/// Maps a model fitted to normalized points back to original units.
SuperquadricModel denormalize(const SuperquadricModel& model, const NormalizationRecord& record);
/// Inverse of denormalize.
SuperquadricModel normalize(const SuperquadricModel& model, const NormalizationRecord& record);

std::size_t parameter_count(FitMode mode);
Eigen::VectorXd model_to_theta(const SuperquadricModel& model, FitMode mode);
SuperquadricModel theta_to_model(const Eigen::VectorXd& theta, FitMode mode);

/// Entries of theta held fixed in `mode` (exponents of the type-specific
/// modes); the solver only sees the others.
std::vector<bool> fixed_parameters(FitMode mode);

struct ParameterBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

/// Box for theta derived from the extent of the (normalized) cloud.
ParameterBounds parameter_bounds(FitMode mode, std::span<const Vec3> points);

/// Initial theta: PCA frame with principal axis `axis_assignment` (0 is the
/// largest) on the local z-axis, centroid translation and per-axis median
/// absolute coordinate as sizes. Throws Errc::DegenerateCloud.
Eigen::VectorXd pca_initialize(std::span<const Vec3> points, FitMode mode, int axis_assignment);

/// Volume of the axis-aligned bounding box.
double bounding_box_volume(std::span<const Vec3> points);

/// Unnormalized stationary point of the objective in u:
/// exp(-d/lambda) * sigma^(-6/lambda) / (M e), d = residual^2 / sigma^2.
std::vector<double> raw_membership(std::span<const double> residuals, double sigma2, double lambda);

struct MembershipParams {
    double lambda = 3.0;
    double outlier_weight = 0.1;
    /// Bounding-box volume of the cloud.
    double volume = 1.0;
};

/// raw / (raw + p) with the uniform outlier density p; every entry in (0, 1].
std::vector<double> update_membership(std::span<const double> residuals, double sigma2, const MembershipParams& params);

/// sum(u r^2) / (3 sum u), clamped below at `floor`.
double update_sigma(std::span<const double> u, std::span<const double> residuals, double floor);

/// sum u d + u log(sigma^6) + lambda u (log u + log M), d = residual^2 / sigma^2.
double objective(std::span<const double> u, std::span<const double> residuals, double sigma2, double lambda);

/// Weighted least-squares update of theta for fixed u and sigma^2.
Eigen::VectorXd update_theta(const Eigen::VectorXd& theta, std::span<const double> u, double sigma2,
                             ResidualEvaluator& evaluator, FitMode mode, const ParameterBounds& bounds,
                             const SolverOptions& options, SolverReport* report = nullptr);

enum class FitStatus { Converged, MaxIters };

std::string_view to_string(FitStatus status);

struct FitState {
    std::vector<double> u;
    double sigma2 = 1.0;
    Eigen::VectorXd theta;
    double loss = 0.0;
};

/// One run of the alternating loop from one initialization.
struct InitRun {
    int axis_assignment = 0;
    FitState state;
    std::vector<double> loss_trace;
    FitStatus status = FitStatus::MaxIters;
    double mean_residual = 0.0;
    bool bounds_respected = true;
};

struct FitResult {
    SuperquadricModel model;
    /// The same model in the normalized frame of the input.
    SuperquadricModel normalized_model;
    NormalizationRecord normalization;
    FitState final_state;
    std::vector<double> loss_trace;
    FitStatus status = FitStatus::MaxIters;
    int chosen_init = 0;
    std::vector<InitRun> runs;
};

/// Runs the loop from `theta0` on normalized points.
InitRun run_from(std::span<const Vec3> normalized_points, const Eigen::VectorXd& theta0, const FitConfig& config);

FitResult fit(std::span<const Vec3> points, const FitConfig& config = {});

}  // namespace sqfit
