#pragma once

// Data-parallel inner loops of the fitter and the evaluation metric. Each
// kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant; the table is chosen once at startup from the CPU features (the
// SQFIT_SIMD environment variable, "scalar" or "avx2", overrides the choice).
//
// All point arrays are structure-of-arrays with equal lengths.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace sqfit::kernels {

struct ShapeParams {
    double eps1 = 1.0;
    double eps2 = 1.0;
    double ax = 1.0;
    double ay = 1.0;
    double az = 1.0;
};

/// Canonical points closer than this to the centre have no radial projection.
inline constexpr double kOriginGuard = 1e-12;
/// Tapering factors smaller than this in magnitude are treated as singular.
inline constexpr double kTaperGuard = 1e-12;

struct KernelTable {
    std::string_view name;

    /// out = R^T (in - t); rotation is row-major.
    void (*rigid_inverse)(const double* rotation, const double* translation, std::span<const double> x,
                          std::span<const double> y, std::span<const double> z, std::span<double> px,
                          std::span<double> py, std::span<double> pz);

    /// In-place inverse taper of (px, py) given pz. Clears valid[i] where
    /// a tapering factor is singular; never sets it.
    void (*taper_inverse)(double kx, double ky, double az, std::span<double> px, std::span<double> py,
                          std::span<const double> pz, std::span<std::uint8_t> valid);

    /// Radial residual |1 - F^(-eps1/2)| * |p| per canonical point. Points
    /// with valid[i] == 0 or |p| < kOriginGuard get `fallback`.
    void (*radial_residual)(const ShapeParams& shape, std::span<const double> px, std::span<const double> py,
                            std::span<const double> pz, std::span<const std::uint8_t> valid, double fallback,
                            std::span<double> out);

    /// min(best, min_i |q - p_i|^2).
    double (*min_sq_distance)(double qx, double qy, double qz, std::span<const double> x, std::span<const double> y,
                              std::span<const double> z, double best);

    void (*exp_n)(std::span<const double> in, std::span<double> out);
    void (*log_n)(std::span<const double> in, std::span<double> out);
};

const KernelTable& scalar_table();

/// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

/// Every table usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

/// The table the library uses.
const KernelTable& active();

}  // namespace sqfit::kernels
