#include "sqfit/metrics.hpp"

#include "sqfit/error.hpp"
#include "sqfit/nearest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sqfit {

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

EvalReport summarize(std::vector<double> distances) {
    EvalReport r;
    r.point_count = distances.size();
    if (distances.empty()) return r;
    std::sort(distances.begin(), distances.end());
    r.mean = std::accumulate(distances.begin(), distances.end(), 0.0) / static_cast<double>(distances.size());
    r.p25 = quantile_sorted(distances, 0.25);
    r.median = quantile_sorted(distances, 0.5);
    r.p75 = quantile_sorted(distances, 0.75);
    return r;
}

std::vector<double> surface_distances(std::span<const Vec3> points, const SuperquadricModel& model, std::size_t k) {
    if (k < 1000) throw Error(Errc::InvalidK, "surface sample count must be at least 1000");
    const SurfaceSampling samples = sample_surface_count(model, k);
    return nearest_distances(points, samples.points);
}

EvalReport fit_error(std::span<const Vec3> points, const SuperquadricModel& model, std::size_t k) {
    if (k < 1000) throw Error(Errc::InvalidK, "surface sample count must be at least 1000");
    const SurfaceSampling samples = sample_surface_count(model, k);
    EvalReport r = summarize(nearest_distances(points, samples.points));
    r.sample_count = samples.points.size();
    return r;
}

double point_to_sphere_distance(const Vec3& x, const Vec3& centre, double radius) {
    return std::abs((x - centre).norm() - radius);
}

EvalReport sphere_error(std::span<const Vec3> points, const Vec3& centre, double radius) {
    std::vector<double> d(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) d[i] = point_to_sphere_distance(points[i], centre, radius);
    return summarize(std::move(d));
}

Prop1Gap prop1_gap(const Vec3& x, std::span<const Vec3> centroids, double r_fuzzy) {
    if (centroids.size() < 2) throw Error(Errc::InvalidConfig, "at least two centroids are required");
    if (!(r_fuzzy > 1.0)) throw Error(Errc::InvalidConfig, "fuzzy exponent must exceed 1");
    const std::size_t c = centroids.size();
    std::vector<double> d(c);
    for (std::size_t j = 0; j < c; ++j) {
        const double dist = (x - centroids[j]).norm();
        if (dist < 1e-12) throw Error(Errc::CoincidentCentroid, "a centroid coincides with the sample");
        d[j] = dist * dist;
    }
    const double v = 1.0 / (r_fuzzy - 1.0);

    Prop1Gap out;
    for (std::size_t j = 0; j < c; ++j) {
        double denom = 0.0;
        for (std::size_t l = 0; l < c; ++l) denom += std::exp(v * (std::log(d[j]) - std::log(d[l])));
        const double u = 1.0 / denom;
        out.weighted_sum += std::pow(u, r_fuzzy) * d[j];
    }
    const auto min_it = std::min_element(d.begin(), d.end());
    out.min_dist_sq = *min_it;

    // gap = min * (1 - (1 + T)^(-1/v)), T = sum over the others of (min/d_j)^v.
    const double log_min = std::log(out.min_dist_sq);
    double log_t = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
        if (j == static_cast<std::size_t>(min_it - d.begin())) continue;
        const double term = v * (log_min - std::log(d[j]));
        const double hi = std::max(log_t, term);
        log_t = hi == -std::numeric_limits<double>::infinity()
                    ? hi
                    : hi + std::log(std::exp(log_t - hi) + std::exp(term - hi));
    }
    if (log_t < -30.0) {
        out.log_gap = log_min + log_t - std::log(v);
    } else {
        out.log_gap = log_min + std::log(-std::expm1(-std::log1p(std::exp(log_t)) / v));
    }
    return out;
}

}  // namespace sqfit
