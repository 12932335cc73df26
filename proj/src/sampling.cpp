#include "sqfit/error.hpp"
#include "sqfit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sqfit {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2;
constexpr double kTwoPi = 2 * std::numbers::pi;
constexpr double kMinStep = 1e-4;
constexpr double kMaxStep = 0.5;
constexpr double kFdStep = 1e-6;

// The sampler walks the surface in ray angles (elevation, azimuth of the
// direction from the centre) rather than in the spherical-product angles:
// the surface is star-shaped, and the ray parametrisation stays well
// conditioned even for exponents close to zero where cos^eps is not.
class SurfaceMap {
  public:
    explicit SurfaceMap(const SuperquadricModel& model) : model_(model), shape_(model.shape()) {}

    // Deformed canonical point; pose is applied by the caller.
    Vec3 operator()(double elevation, double azimuth) const {
        const double ce = std::cos(elevation);
        const Vec3 dir{ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
        const double scale = std::exp(-0.5 * shape_.eps1 * log_implicit_value(shape_, dir));
        return apply_deformation(model_, scale * dir);
    }

    double elevation_speed(double elevation, double azimuth) const {
        const double lo = std::max(-kHalfPi, elevation - kFdStep);
        const double hi = std::min(kHalfPi, elevation + kFdStep);
        return ((*this)(hi, azimuth) - (*this)(lo, azimuth)).norm() / (hi - lo);
    }

    double azimuth_speed(double elevation, double azimuth) const {
        return ((*this)(elevation, azimuth + kFdStep) - (*this)(elevation, azimuth - kFdStep)).norm() / (2 * kFdStep);
    }

    // Fastest meridian through this latitude; stepping by it keeps adjacent
    // rings no further apart than the spacing on any side of the shape.
    double meridian_speed(double elevation) const {
        double best = 0.0;
        for (int k = 0; k < 8; ++k) best = std::max(best, elevation_speed(elevation, k * std::numbers::pi / 4));
        return best;
    }

  private:
    const SuperquadricModel& model_;
    Shape shape_;
};

double angular_step(double spacing, double speed) {
    if (!(speed > 0.0) || !std::isfinite(speed)) return kMaxStep;
    return std::clamp(spacing / speed, kMinStep, kMaxStep);
}

template <class Emit>
void walk_surface(const SurfaceMap& map, double spacing, Emit&& emit) {
    emit(map(-kHalfPi, 0.0));
    double step = angular_step(spacing, map.meridian_speed(-kHalfPi));
    double elevation = -kHalfPi + step;
    while (elevation < kHalfPi - 0.5 * step) {
        double azimuth = 0.0;
        double az_step = 0.0;
        do {
            emit(map(elevation, azimuth));
            az_step = angular_step(spacing, map.azimuth_speed(elevation, azimuth));
            azimuth += az_step;
        } while (azimuth < kTwoPi - 0.5 * az_step);
        step = angular_step(spacing, map.meridian_speed(elevation));
        elevation += step;
    }
    emit(map(kHalfPi, 0.0));
}

std::size_t count_samples(const SurfaceMap& map, double spacing) {
    std::size_t count = 0;
    walk_surface(map, spacing, [&](const Vec3&) { ++count; });
    return count;
}

}  // namespace

SurfaceSampling sample_surface(const SuperquadricModel& model, double spacing) {
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw Error(Errc::InvalidSpacing, "sample spacing must be positive");
    const SurfaceMap map(model);
    const Mat3 rotation = model.rotation();
    SurfaceSampling out;
    out.spacing = spacing;
    walk_surface(map, spacing, [&](const Vec3& p) { out.points.push_back(rotation * p + model.translation); });
    return out;
}

double surface_area(const SuperquadricModel& model) {
    const SurfaceMap map(model);
    constexpr int n_el = 64;
    constexpr int n_az = 128;
    const double d_el = std::numbers::pi / n_el;
    const double d_az = kTwoPi / n_az;
    const double h = 1e-6;
    double area = 0.0;
    for (int i = 0; i < n_el; ++i) {
        const double el = -kHalfPi + (i + 0.5) * d_el;
        for (int j = 0; j < n_az; ++j) {
            const double az = (j + 0.5) * d_az;
            const Vec3 t_el = (map(el + h, az) - map(el - h, az)) / (2 * h);
            const Vec3 t_az = (map(el, az + h) - map(el, az - h)) / (2 * h);
            area += t_el.cross(t_az).norm() * d_el * d_az;
        }
    }
    return area;
}

SurfaceSampling sample_surface_count(const SuperquadricModel& model, std::size_t target_count) {
    if (target_count == 0) throw Error(Errc::InvalidSpacing, "target sample count must be positive");
    const SurfaceMap map(model);
    const double target = static_cast<double>(target_count);
    double spacing = std::sqrt(surface_area(model) / target);
    for (int iter = 0; iter < 8; ++iter) {
        const double count = static_cast<double>(count_samples(map, spacing));
        if (std::abs(count - target) <= 0.02 * target) break;
        spacing *= std::sqrt(count / target);
    }
    return sample_surface(model, spacing);
}

}  // namespace sqfit
