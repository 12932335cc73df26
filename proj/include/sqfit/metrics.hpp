#pragma once

#include "sqfit/geometry.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace sqfit {

struct EvalReport {
    double mean = 0.0;
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    /// Surface samples used (0 for closed-form distances).
    std::size_t sample_count = 0;
    std::size_t point_count = 0;
};

inline constexpr std::size_t kDefaultSurfaceSamples = 10000;

/// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

/// Mean, median and quartiles of non-negative distances.
EvalReport summarize(std::vector<double> distances);

/// Distance from each point to its nearest neighbour among ~K evenly spaced
/// samples of the model surface. Throws Errc::InvalidK for K < 1000.
EvalReport fit_error(std::span<const Vec3> points, const SuperquadricModel& model,
                     std::size_t k = kDefaultSurfaceSamples);

/// Per-point distances behind fit_error.
std::vector<double> surface_distances(std::span<const Vec3> points, const SuperquadricModel& model, std::size_t k);

/// | |x - c| - r |.
double point_to_sphere_distance(const Vec3& x, const Vec3& centre, double radius);

EvalReport sphere_error(std::span<const Vec3> points, const Vec3& centre, double radius);

struct Prop1Gap {
    /// sum_j u_j^r |x - v_j|^2 with fuzzy c-means memberships u_j.
    double weighted_sum = 0.0;
    double min_dist_sq = 0.0;
    /// log(min_dist_sq - weighted_sum), accurate where the difference
    /// underflows; -inf when it is exactly zero.
    double log_gap = 0.0;

    double gap() const { return min_dist_sq - weighted_sum; }
};

/// Throws Errc::CoincidentCentroid when a centroid is within 1e-12 of x and
/// Errc::InvalidConfig for fewer than two centroids or r_fuzzy <= 1.
Prop1Gap prop1_gap(const Vec3& x, std::span<const Vec3> centroids, double r_fuzzy);

}  // namespace sqfit
