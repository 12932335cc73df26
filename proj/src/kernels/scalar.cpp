#include "kernels/variants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sqfit::kernels {

namespace {

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

void rigid_inverse(const double* r, const double* t, std::span<const double> x, std::span<const double> y,
                   std::span<const double> z, std::span<double> px, std::span<double> py, std::span<double> pz) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - t[0];
        const double dy = y[i] - t[1];
        const double dz = z[i] - t[2];
        px[i] = r[0] * dx + r[3] * dy + r[6] * dz;
        py[i] = r[1] * dx + r[4] * dy + r[7] * dz;
        pz[i] = r[2] * dx + r[5] * dy + r[8] * dz;
    }
}

void taper_inverse(double kx, double ky, double az, std::span<double> px, std::span<double> py,
                   std::span<const double> pz, std::span<std::uint8_t> valid) {
    const double cx = kx / az;
    const double cy = ky / az;
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double fx = cx * pz[i] + 1.0;
        const double fy = cy * pz[i] + 1.0;
        if (std::abs(fx) < kTaperGuard || std::abs(fy) < kTaperGuard) valid[i] = 0;
        px[i] = px[i] / fx;
        py[i] = py[i] / fy;
    }
}

void radial_residual(const ShapeParams& s, std::span<const double> px, std::span<const double> py,
                     std::span<const double> pz, std::span<const std::uint8_t> valid, double fallback,
                     std::span<double> out) {
    const double e2 = 2.0 / s.eps2;
    const double e1 = 2.0 / s.eps1;
    const double ratio = s.eps2 / s.eps1;
    const double half_eps1 = 0.5 * s.eps1;
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double norm = std::sqrt(px[i] * px[i] + py[i] * py[i] + pz[i] * pz[i]);
        if (!valid[i] || !(norm >= kOriginGuard)) {
            out[i] = fallback;
            continue;
        }
        const double lx = std::log(std::abs(px[i]) / s.ax);
        const double ly = std::log(std::abs(py[i]) / s.ay);
        const double lz = std::log(std::abs(pz[i]) / s.az);
        const double lxy = log_add_exp(e2 * lx, e2 * ly) * ratio;
        const double log_f = log_add_exp(lxy, e1 * lz);
        const double scale = std::exp(-half_eps1 * log_f);
        out[i] = std::abs(1.0 - scale) * norm;
    }
}

double min_sq_distance(double qx, double qy, double qz, std::span<const double> x, std::span<const double> y,
                       std::span<const double> z, double best) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - qx;
        const double dy = y[i] - qy;
        const double dz = z[i] - qz;
        best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    return best;
}

void exp_n(std::span<const double> in, std::span<double> out) {
    std::transform(in.begin(), in.end(), out.begin(), [](double v) { return std::exp(v); });
}

void log_n(std::span<const double> in, std::span<double> out) {
    std::transform(in.begin(), in.end(), out.begin(), [](double v) { return std::log(v); });
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{"scalar", rigid_inverse, taper_inverse, radial_residual, min_sq_distance, exp_n, log_n};
    return table;
}

}  // namespace sqfit::kernels
