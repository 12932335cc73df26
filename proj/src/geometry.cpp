#include "sqfit/geometry.hpp"

#include "sqfit/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace sqfit {

namespace {

constexpr double kTaperGuard = 1e-12;
constexpr double kOriginGuard = 1e-12;

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// cos/sin that return exact zeros at the quarter turns the parametric form
// is usually evaluated at; otherwise |cos(pi/2)|^eps would be visibly
// non-zero for small eps.
std::pair<double, double> cos_sin(double angle) {
    constexpr double half_pi = std::numbers::pi / 2;
    if (angle == 0.0) return {1.0, 0.0};
    if (angle == half_pi) return {0.0, 1.0};
    if (angle == -half_pi) return {0.0, -1.0};
    if (angle == std::numbers::pi || angle == -std::numbers::pi) return {-1.0, 0.0};
    return {std::cos(angle), std::sin(angle)};
}

double signed_pow(double base, double exponent) {
    return std::copysign(std::pow(std::abs(base), exponent), base);
}

}  // namespace

Mat3 rotation_from_euler(const Vec3& euler) {
    return (Eigen::AngleAxisd(euler[0], Vec3::UnitZ()) * Eigen::AngleAxisd(euler[1], Vec3::UnitY()) *
            Eigen::AngleAxisd(euler[2], Vec3::UnitX()))
        .toRotationMatrix();
}

Vec3 euler_from_rotation(const Mat3& rotation) {
    return rotation.eulerAngles(2, 1, 0);
}

double implicit_value(const Shape& shape, const CanonicalPoint& p) {
    const double e2 = 2.0 / shape.eps2;
    const double xy = std::pow(std::abs(p.x() / shape.size.x()), e2) + std::pow(std::abs(p.y() / shape.size.y()), e2);
    return std::pow(xy, shape.eps2 / shape.eps1) + std::pow(std::abs(p.z() / shape.size.z()), 2.0 / shape.eps1);
}

double log_implicit_value(const Shape& shape, const CanonicalPoint& p) {
    const double lx = std::log(std::abs(p.x()) / shape.size.x());
    const double ly = std::log(std::abs(p.y()) / shape.size.y());
    const double lz = std::log(std::abs(p.z()) / shape.size.z());
    const double e2 = 2.0 / shape.eps2;
    const double lxy = log_add_exp(e2 * lx, e2 * ly);
    const double term_xy = lxy == -std::numeric_limits<double>::infinity() ? lxy : lxy * (shape.eps2 / shape.eps1);
    return log_add_exp(term_xy, (2.0 / shape.eps1) * lz);
}

CanonicalPoint parametric_point(const Shape& shape, double eta, double omega) {
    const auto [ce, se] = cos_sin(eta);
    const auto [co, so] = cos_sin(omega);
    const double lat = signed_pow(ce, shape.eps1);
    return {shape.size.x() * lat * signed_pow(co, shape.eps2), shape.size.y() * lat * signed_pow(so, shape.eps2),
            shape.size.z() * signed_pow(se, shape.eps1)};
}

CanonicalPoint apply_taper(const Taper& taper, double az, const CanonicalPoint& p) {
    const double fx = taper.kx / az * p.z() + 1.0;
    const double fy = taper.ky / az * p.z() + 1.0;
    return {fx * p.x(), fy * p.y(), p.z()};
}

std::optional<CanonicalPoint> try_inverse_taper(const Taper& taper, double az, const CanonicalPoint& q) {
    const double fx = taper.kx / az * q.z() + 1.0;
    const double fy = taper.ky / az * q.z() + 1.0;
    if (std::abs(fx) < kTaperGuard || std::abs(fy) < kTaperGuard) return std::nullopt;
    return CanonicalPoint{q.x() / fx, q.y() / fy, q.z()};
}

CanonicalPoint inverse_taper(const Taper& taper, double az, const CanonicalPoint& q) {
    auto p = try_inverse_taper(taper, az, q);
    if (!p) throw Error(Errc::DegenerateTaperPlane, "point lies on the singular plane of the taper");
    return *p;
}

// The radial term cos(alpha - atan2(y, x)) * hypot(x, y) is the projection of
// (x, y) onto the bending direction; written that way it needs no special
// case on the z-axis.
CanonicalPoint apply_bend(const Bend& bend, const CanonicalPoint& p) {
    const double ca = std::cos(bend.alpha);
    const double sa = std::sin(bend.alpha);
    const double inv_k = 1.0 / bend.kappa;
    const double r = p.x() * ca + p.y() * sa;
    const double gamma = p.z() * bend.kappa;
    const double big_r = inv_k - std::cos(gamma) * (inv_k - r);
    return {p.x() + ca * (big_r - r), p.y() + sa * (big_r - r), std::sin(gamma) * (inv_k - r)};
}

std::optional<CanonicalPoint> try_inverse_bend(const Bend& bend, const CanonicalPoint& q) {
    const double ca = std::cos(bend.alpha);
    const double sa = std::sin(bend.alpha);
    const double inv_k = 1.0 / bend.kappa;
    const double big_r = q.x() * ca + q.y() * sa;
    const double gamma = std::atan2(q.z(), inv_k - big_r);
    if (std::abs(gamma) > std::numbers::pi / 2) return std::nullopt;
    const double r = inv_k - std::hypot(q.z(), inv_k - big_r);
    return CanonicalPoint{q.x() - ca * (big_r - r), q.y() - sa * (big_r - r), gamma / bend.kappa};
}

CanonicalPoint inverse_bend(const Bend& bend, const CanonicalPoint& q) {
    auto p = try_inverse_bend(bend, q);
    if (!p) throw Error(Errc::BendOutOfRange, "point lies outside the principal branch of the bend");
    return *p;
}

CanonicalPoint apply_deformation(const SuperquadricModel& model, const CanonicalPoint& p) {
    if (const auto* taper = std::get_if<Taper>(&model.deformation)) return apply_taper(*taper, model.size.z(), p);
    if (const auto* bend = std::get_if<Bend>(&model.deformation)) return apply_bend(*bend, p);
    return p;
}

std::optional<CanonicalPoint> try_inverse_deformation(const SuperquadricModel& model, const CanonicalPoint& q) {
    if (const auto* taper = std::get_if<Taper>(&model.deformation)) return try_inverse_taper(*taper, model.size.z(), q);
    if (const auto* bend = std::get_if<Bend>(&model.deformation)) return try_inverse_bend(*bend, q);
    return q;
}

CanonicalPoint world_to_canonical(const SuperquadricModel& model, const Vec3& x) {
    const CanonicalPoint local = model.rotation().transpose() * (x - model.translation);
    if (const auto* taper = std::get_if<Taper>(&model.deformation)) return inverse_taper(*taper, model.size.z(), local);
    if (const auto* bend = std::get_if<Bend>(&model.deformation)) return inverse_bend(*bend, local);
    return local;
}

Vec3 canonical_to_world(const SuperquadricModel& model, const CanonicalPoint& p) {
    return model.rotation() * apply_deformation(model, p) + model.translation;
}

RadialProjection radial_project(const SuperquadricModel& model, const Vec3& x) {
    const CanonicalPoint pc = world_to_canonical(model, x);
    const double norm = pc.norm();
    if (norm < kOriginGuard) throw Error(Errc::DegenerateOrigin, "radial projection of the superquadric centre is undefined");
    const double scale = std::exp(-0.5 * model.eps1 * log_implicit_value(model.shape(), pc));
    return {canonical_to_world(model, scale * pc), std::abs(1.0 - scale) * norm};
}

}  // namespace sqfit
