#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

namespace sqfit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// A point expressed in the superquadric's object-centred, undeformed frame.
using CanonicalPoint = Vec3;

struct NoDeformation {
    bool operator==(const NoDeformation&) const = default;
};

/// Linear tapering of the x/y cross-sections along z; kx, ky in [-1, 1].
struct Taper {
    double kx = 0.0;
    double ky = 0.0;
    bool operator==(const Taper&) const = default;
};

/// Bending of the z-axis onto a circular arc of curvature kappa, bending
/// towards direction alpha in the x-y plane.
struct Bend {
    double kappa = 0.1;
    double alpha = 0.0;
    bool operator==(const Bend&) const = default;
};

using Deformation = std::variant<NoDeformation, Taper, Bend>;

/// Shape exponents and half-axis lengths; everything the inside-outside
/// function needs.
struct Shape {
    double eps1 = 1.0;
    double eps2 = 1.0;
    Vec3 size = Vec3::Ones();
};

/// Rotation convention: R = Rz(euler[0]) * Ry(euler[1]) * Rx(euler[2]).
Mat3 rotation_from_euler(const Vec3& euler);

/// Inverse of rotation_from_euler for proper rotations.
Vec3 euler_from_rotation(const Mat3& rotation);

struct SuperquadricModel {
    double eps1 = 1.0;
    double eps2 = 1.0;
    Vec3 size = Vec3::Ones();
    Vec3 euler = Vec3::Zero();
    Vec3 translation = Vec3::Zero();
    Deformation deformation = NoDeformation{};

    Shape shape() const { return {eps1, eps2, size}; }
    Mat3 rotation() const { return rotation_from_euler(euler); }

    bool operator==(const SuperquadricModel&) const = default;
};

/// Inside-outside function F; 1 on the surface, < 1 inside, > 1 outside.
/// Coordinates enter through their absolute value, so F is total on finite
/// input (a zero coordinate contributes nothing).
double implicit_value(const Shape& shape, const CanonicalPoint& p);

/// log F evaluated without forming the large powers; finite wherever F > 0
/// and -inf at the origin. Used wherever exponents like 2/eps get large.
double log_implicit_value(const Shape& shape, const CanonicalPoint& p);

/// Spherical-product surface point. Negative bases use the signed power
/// sign(c) * |c|^eps so all octants are covered.
CanonicalPoint parametric_point(const Shape& shape, double eta, double omega);

CanonicalPoint apply_taper(const Taper& taper, double az, const CanonicalPoint& p);

/// Throws Errc::DegenerateTaperPlane when a tapering factor is below 1e-12
/// in magnitude.
CanonicalPoint inverse_taper(const Taper& taper, double az, const CanonicalPoint& q);

CanonicalPoint apply_bend(const Bend& bend, const CanonicalPoint& p);

/// Throws Errc::BendOutOfRange when the recovered arc angle leaves
/// (-pi/2, pi/2).
CanonicalPoint inverse_bend(const Bend& bend, const CanonicalPoint& q);

/// Non-throwing variants for the inner loops; nullopt where the throwing
/// versions would raise.
std::optional<CanonicalPoint> try_inverse_taper(const Taper& taper, double az, const CanonicalPoint& q);
std::optional<CanonicalPoint> try_inverse_bend(const Bend& bend, const CanonicalPoint& q);

CanonicalPoint apply_deformation(const SuperquadricModel& model, const CanonicalPoint& p);
std::optional<CanonicalPoint> try_inverse_deformation(const SuperquadricModel& model, const CanonicalPoint& q);

/// Rigid inverse R^T (x - t) followed by the inverse deformation.
CanonicalPoint world_to_canonical(const SuperquadricModel& model, const Vec3& x);

/// Deformation followed by the rigid motion R p + t.
Vec3 canonical_to_world(const SuperquadricModel& model, const CanonicalPoint& p);

struct RadialProjection {
    Vec3 surface_point;
    double radial_distance = 0.0;
};

/// Scales the canonical point along its ray from the centre onto the
/// surface. Throws Errc::DegenerateOrigin when the canonical point is
/// (numerically) the centre.
RadialProjection radial_project(const SuperquadricModel& model, const Vec3& x);

struct SurfaceSampling {
    std::vector<Vec3> points;
    double spacing = 0.0;
};

/// Near-equal-arclength samples of the model surface with the given target
/// spacing (world units). Throws Errc::InvalidSpacing for spacing <= 0.
SurfaceSampling sample_surface(const SuperquadricModel& model, double spacing);

/// Same sampler with the spacing chosen so the sample count lands within a
/// few percent of target_count.
SurfaceSampling sample_surface_count(const SuperquadricModel& model, std::size_t target_count);

/// Quadrature estimate of the (deformed) surface area.
double surface_area(const SuperquadricModel& model);

}  // namespace sqfit
