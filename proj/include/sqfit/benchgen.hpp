#pragma once

// Seeded synthetic benchmark: random superquadrics sampled at a fixed
// interval, then occluded, perturbed with Gaussian noise and padded with
// uniform outliers.

#include "sqfit/geometry.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace sqfit {

enum class GenMode { Rigid, Taper, Bend };

std::string_view to_string(GenMode mode);
std::optional<GenMode> parse_gen_mode(std::string_view name);

using Rng = std::mt19937_64;

struct GenSpec {
    std::uint64_t seed = 0;
    GenMode mode = GenMode::Rigid;
    double partial_ratio = 1.0;
    double noise_sigma = 0.0;
    double outlier_ratio = 0.0;
    double sample_interval = 0.2;
    std::size_t count = 1;
    /// Fixed k1 = k2 for taper sweeps; drawn from U[0, 1] per axis otherwise.
    std::optional<double> taper_k;
    /// Fixed curvature for bend sweeps; drawn from U[0.05, 0.3] otherwise.
    std::optional<double> kappa;
};

/// Throws Errc::InvalidConfig.
void validate(const GenSpec& spec);

nlohmann::json spec_to_json(const GenSpec& spec);
GenSpec spec_from_json(const nlohmann::json& j);

/// Seed of case `index`, derived from the bundle seed with splitmix64.
std::uint64_t case_seed(std::uint64_t seed, std::size_t index);

SuperquadricModel random_model(GenMode mode, Rng& rng, std::optional<double> taper_k = std::nullopt,
                               std::optional<double> kappa = std::nullopt);

/// Keeps the ceil(r M) points with the largest projection on a random view
/// direction, in their original order.
std::vector<Vec3> occlude(std::span<const Vec3> points, double ratio, Rng& rng);

void add_noise(std::vector<Vec3>& points, double sigma, Rng& rng);

/// Appends ceil(ratio M) points drawn uniformly from the bounding box of
/// `points` inflated 1.5x about its centre. Returns per-point outlier flags
/// for the extended list.
std::vector<std::uint8_t> add_outliers(std::vector<Vec3>& points, double ratio, Rng& rng);

struct GroundTruthCase {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    SuperquadricModel model;
    std::vector<Vec3> clean;
    /// Inliers first (occluded and noisy), then outliers.
    std::vector<Vec3> observed;
    std::vector<std::uint8_t> outlier;
    std::size_t num_inliers = 0;
};

GroundTruthCase generate_case(const GenSpec& spec, std::size_t index);

std::string case_name(std::size_t index);

/// Writes case_<id>.xyz, case_<id>.truth.json and manifest.json into `dir`.
void write_bundle(const std::filesystem::path& dir, const GenSpec& spec);

}  // namespace sqfit
