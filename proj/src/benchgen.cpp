#include "sqfit/benchgen.hpp"

#include "sqfit/error.hpp"
#include "sqfit/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace sqfit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// U(0, hi]: the half-open interval flipped so zero is excluded.
double uniform_open_low(Rng& rng, double hi) { return hi - uniform(rng, 0.0, hi); }

Vec3 random_direction(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    while (true) {
        Vec3 v(n(rng), n(rng), n(rng));
        const double len = v.norm();
        if (len > 1e-12) return v / len;
    }
}

std::size_t ceil_count(double ratio, std::size_t m) {
    return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(m) - 1e-9));
}

}  // namespace

std::string_view to_string(GenMode mode) {
    switch (mode) {
        case GenMode::Rigid: return "rigid";
        case GenMode::Taper: return "taper";
        case GenMode::Bend: return "bend";
    }
    return "unknown";
}

std::optional<GenMode> parse_gen_mode(std::string_view name) {
    for (auto m : {GenMode::Rigid, GenMode::Taper, GenMode::Bend})
        if (to_string(m) == name) return m;
    return std::nullopt;
}

void validate(const GenSpec& s) {
    if (!(s.partial_ratio > 0 && s.partial_ratio <= 1))
        throw Error(Errc::InvalidConfig, "partial ratio must lie in (0, 1]");
    if (!(s.noise_sigma >= 0) || !std::isfinite(s.noise_sigma))
        throw Error(Errc::InvalidConfig, "noise sigma must be non-negative");
    if (!(s.outlier_ratio >= 0) || !std::isfinite(s.outlier_ratio))
        throw Error(Errc::InvalidConfig, "outlier ratio must be non-negative");
    if (!(s.sample_interval > 0) || !std::isfinite(s.sample_interval))
        throw Error(Errc::InvalidConfig, "sample interval must be positive");
    if (s.count == 0) throw Error(Errc::InvalidConfig, "count must be positive");
    if (s.taper_k && !(*s.taper_k >= -1 && *s.taper_k <= 1))
        throw Error(Errc::InvalidConfig, "taper k must lie in [-1, 1]");
    if (s.kappa && !(*s.kappa > 0 && std::isfinite(*s.kappa)))
        throw Error(Errc::InvalidConfig, "kappa must be positive");
}

json spec_to_json(const GenSpec& s) {
    json j{{"seed", s.seed},
           {"mode", std::string(to_string(s.mode))},
           {"partial_ratio", s.partial_ratio},
           {"noise_sigma", s.noise_sigma},
           {"outlier_ratio", s.outlier_ratio},
           {"sample_interval", s.sample_interval},
           {"count", s.count}};
    j["taper_k"] = s.taper_k ? json(*s.taper_k) : json(nullptr);
    j["kappa"] = s.kappa ? json(*s.kappa) : json(nullptr);
    return j;
}

GenSpec spec_from_json(const json& j) {
    try {
        GenSpec s;
        s.seed = j.at("seed").get<std::uint64_t>();
        const auto mode = parse_gen_mode(j.at("mode").get<std::string>());
        if (!mode) throw Error(Errc::SchemaViolation, "spec.mode: unknown mode");
        s.mode = *mode;
        s.partial_ratio = j.at("partial_ratio").get<double>();
        s.noise_sigma = j.at("noise_sigma").get<double>();
        s.outlier_ratio = j.at("outlier_ratio").get<double>();
        s.sample_interval = j.at("sample_interval").get<double>();
        s.count = j.at("count").get<std::size_t>();
        if (j.contains("taper_k") && !j["taper_k"].is_null()) s.taper_k = j["taper_k"].get<double>();
        if (j.contains("kappa") && !j["kappa"].is_null()) s.kappa = j["kappa"].get<double>();
        return s;
    } catch (const json::exception& e) {
        throw Error(Errc::SchemaViolation, std::string("spec: ") + e.what());
    }
}

std::uint64_t case_seed(std::uint64_t seed, std::size_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SuperquadricModel random_model(GenMode mode, Rng& rng, std::optional<double> taper_k, std::optional<double> kappa) {
    SuperquadricModel m;
    if (mode == GenMode::Bend) {
        m.eps1 = uniform_open_low(rng, 0.4);
        m.eps2 = uniform_open_low(rng, 2.0);
    } else {
        m.eps1 = uniform_open_low(rng, 2.0);
        m.eps2 = uniform_open_low(rng, 2.0);
    }
    for (int i = 0; i < 3; ++i) m.size[i] = uniform(rng, 0.5, 3.0);
    const Vec3 axis = random_direction(rng);
    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    m.euler = euler_from_rotation(Eigen::AngleAxisd(angle, axis).toRotationMatrix());
    for (int i = 0; i < 3; ++i) m.translation[i] = uniform(rng, -1.0, 1.0);

    if (mode == GenMode::Taper) {
        Taper t;
        if (taper_k) {
            t.kx = t.ky = *taper_k;
        } else {
            t.kx = uniform(rng, 0.0, 1.0);
            t.ky = uniform(rng, 0.0, 1.0);
        }
        m.deformation = t;
    } else if (mode == GenMode::Bend) {
        Bend b;
        b.kappa = kappa ? *kappa : uniform(rng, 0.05, 0.3);
        b.alpha = uniform_open_low(rng, std::numbers::pi / 2);
        // Cross-sections wider than the bending radius fold over themselves.
        while (std::hypot(m.size.x(), m.size.y()) >= 0.9 / b.kappa) {
            m.size.x() = uniform(rng, 0.5, 3.0);
            m.size.y() = uniform(rng, 0.5, 3.0);
        }
        m.deformation = b;
    }
    return m;
}

std::vector<Vec3> occlude(std::span<const Vec3> points, double ratio, Rng& rng) {
    const Vec3 view = random_direction(rng);
    if (ratio >= 1.0) return {points.begin(), points.end()};
    const std::size_t keep = std::min(points.size(), ceil_count(ratio, points.size()));
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> proj(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) proj[i] = points[i].dot(view);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return proj[a] > proj[b]; });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    std::vector<Vec3> out;
    out.reserve(keep);
    for (const auto i : order) out.push_back(points[i]);
    return out;
}

void add_noise(std::vector<Vec3>& points, double sigma, Rng& rng) {
    if (sigma == 0.0) return;
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& p : points)
        for (int a = 0; a < 3; ++a) p[a] += n(rng);
}

std::vector<std::uint8_t> add_outliers(std::vector<Vec3>& points, double ratio, Rng& rng) {
    const std::size_t m = points.size();
    const std::size_t extra = ratio > 0 ? ceil_count(ratio, m) : 0;
    std::vector<std::uint8_t> flags(m, 0);
    if (extra == 0 || m == 0) return flags;
    Vec3 lo = points[0];
    Vec3 hi = points[0];
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 centre = 0.5 * (lo + hi);
    const Vec3 half = 0.75 * (hi - lo);
    for (std::size_t i = 0; i < extra; ++i) {
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = uniform(rng, centre[a] - half[a], centre[a] + half[a]);
        points.push_back(p);
        flags.push_back(1);
    }
    return flags;
}

GroundTruthCase generate_case(const GenSpec& spec, std::size_t index) {
    validate(spec);
    GroundTruthCase c;
    c.index = index;
    c.seed = case_seed(spec.seed, index);
    Rng rng(c.seed);
    c.model = random_model(spec.mode, rng, spec.taper_k, spec.kappa);
    c.clean = sample_surface(c.model, spec.sample_interval).points;
    c.observed = occlude(c.clean, spec.partial_ratio, rng);
    add_noise(c.observed, spec.noise_sigma, rng);
    c.num_inliers = c.observed.size();
    c.outlier = add_outliers(c.observed, spec.outlier_ratio, rng);
    return c;
}

std::string case_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "case_%04zu", index);
    return buf;
}

void write_bundle(const fs::path& dir, const GenSpec& spec) {
    validate(spec);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
    json manifest{{"spec", spec_to_json(spec)}, {"cases", json::array()}};
    for (std::size_t i = 0; i < spec.count; ++i) {
        const GroundTruthCase c = generate_case(spec, i);
        const std::string name = case_name(i);
        write_cloud(dir / (name + ".xyz"), c.observed, CloudFormat::Xyz);
        const json truth{{"id", i},
                         {"seed", c.seed},
                         {"model", model_to_json(c.model)},
                         {"spec", spec_to_json(spec)},
                         {"num_points", c.observed.size()},
                         {"num_inliers", c.num_inliers},
                         {"num_clean", c.clean.size()}};
        write_json(dir / (name + ".truth.json"), truth);
        manifest["cases"].push_back(
            {{"id", i}, {"seed", c.seed}, {"cloud", name + ".xyz"}, {"truth", name + ".truth.json"}});
    }
    write_json(dir / "manifest.json", manifest);
}

}  // namespace sqfit
