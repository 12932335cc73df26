// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.
//
// usage: sqfit_acceptance [work_dir]

#include "sqfit/bench.hpp"
#include "sqfit/benchgen.hpp"
#include "sqfit/fitting.hpp"
#include "sqfit/geometry.hpp"
#include "sqfit/kernels.hpp"
#include "sqfit/log.hpp"
#include "sqfit/metrics.hpp"
#include "sqfit/solver.hpp"
#include "support/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace sqfit;
namespace fs = std::filesystem;
using sqfit::testing::Gen;
using Clock = std::chrono::steady_clock;

// Tolerances and sizes.
constexpr int kGeometryDraws = 2000;
constexpr double kImplicitTol = 1e-9;
constexpr double kRoundTripTol = 1e-8;
constexpr double kOnSurfaceTol = 1e-7;
constexpr double kGeometrySeconds = 5.0;
constexpr double kMonotoneTol = 1e-10;
constexpr double kConvergedFraction = 0.95;
constexpr double kRigidMedian = 1e-2;
constexpr double kRigidMean = 5e-2;
constexpr double kRigidSeconds = 180.0;
constexpr double kOcclusionMedian = 0.3;
constexpr double kTaperMedian = 5e-2;
constexpr double kBendThreshold = 0.1;
constexpr double kBendFraction = 0.8;
constexpr double kOutlierFactor = 2.0;
constexpr double kGapRatio = 5e-2;
constexpr int kOracleInstances = 20;
constexpr int kRandomMemberships = 10000;
constexpr double kRosenbrockTol = 1e-6;
constexpr std::size_t kPerfPoints = 2000;
constexpr double kPerfSeconds = 5.0;
/// Surface samples for the fit error; see README.
constexpr std::size_t kEvalSamples = 100000;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// One generated bundle fitted with one configuration.
struct Group {
    std::string name;
    GenSpec spec;
    FitConfig config;
    bool noise_free_full = false;
};

struct GroupResult {
    std::vector<CaseRecord> records;
    std::string csv;
    double seconds = 0.0;
};

GroupResult run_group(const fs::path& root, const Group& g) {
    const fs::path dir = root / g.name;
    fs::remove_all(dir);
    write_bundle(dir, g.spec);
    BenchOptions options;
    options.fit = g.config;
    options.eval_samples = kEvalSamples;
    const auto start = Clock::now();
    GroupResult out;
    out.records = run_bench(dir / "manifest.json", options);
    out.seconds = seconds_since(start);
    out.csv = cases_csv(out.records);
    std::ofstream(dir / "cases.csv", std::ios::binary) << out.csv;
    return out;
}

std::vector<double> normalized_errors(const GroupResult& r) {
    std::vector<double> v;
    for (const auto& c : r.records) v.push_back(c.status == "error" ? HUGE_VAL : c.error_normalized.mean);
    return v;
}

std::vector<Group> benchmark_groups() {
    std::vector<Group> groups;
    auto rigid = [](std::uint64_t seed, double partial, std::size_t count) {
        GenSpec s;
        s.seed = seed;
        s.partial_ratio = partial;
        s.count = count;
        return s;
    };
    groups.push_back({"rigid_r1", rigid(101, 1.0, 100), {}, true});
    groups.push_back({"rigid_r05", rigid(102, 0.5, 50), {}, false});
    groups.push_back({"rigid_r03", rigid(103, 0.3, 50), {}, false});

    GenSpec taper;
    taper.seed = 104;
    taper.mode = GenMode::Taper;
    taper.taper_k = 1.0;
    taper.count = 20;
    FitConfig taper_fit;
    taper_fit.mode = FitMode::Taper;
    groups.push_back({"taper_lambda3", taper, taper_fit, true});
    taper_fit.lambda = 0.1;
    groups.push_back({"taper_lambda0.1", taper, taper_fit, true});

    for (double kappa : {0.05, 0.15, 0.3}) {
        GenSpec bend;
        bend.seed = 105;
        bend.mode = GenMode::Bend;
        bend.kappa = kappa;
        bend.count = 10;
        FitConfig bend_fit;
        bend_fit.mode = FitMode::Bend;
        groups.push_back({fmt("bend_kappa%.2f", kappa), bend, bend_fit, true});
    }

    // Same seed as rigid_r1: the first 30 shapes match, with outliers added.
    GenSpec outliers = rigid(101, 1.0, 30);
    outliers.outlier_ratio = 0.3;
    FitConfig outlier_fit;
    outlier_fit.outlier_weight = 0.1;
    groups.push_back({"rigid_outliers", outliers, outlier_fit, false});
    return groups;
}

Verdict geometry_invariants() {
    Gen g(1001);
    const auto start = Clock::now();
    double implicit = 0, taper = 0, bend = 0, rigid = 0, surface = 0;
    for (int i = 0; i < kGeometryDraws; ++i) {
        const Shape s = g.shape();
        const Vec3 p = parametric_point(s, g.uniform(-1.57, 1.57), g.uniform(-3.14, 3.14));
        implicit = std::max(implicit, std::abs(implicit_value(s, p) - 1.0));

        const Taper t{g.uniform(-1, 1), g.uniform(-1, 1)};
        const double az = g.uniform(0.5, 3);
        const Vec3 pt(g.uniform(-3, 3), g.uniform(-3, 3), g.uniform(-0.9 * az, 0.9 * az));
        taper = std::max(taper, (inverse_taper(t, az, apply_taper(t, az, pt)) - pt).norm());

        const Bend b{g.uniform(0.05, 0.3), g.uniform(0, std::numbers::pi / 2)};
        const Vec3 pb = g.box(1.0);
        bend = std::max(bend, (inverse_bend(b, apply_bend(b, pb)) - pb).norm());

        const SuperquadricModel m = g.rigid_model();
        const Vec3 x = g.box(5.0);
        rigid = std::max(rigid, (canonical_to_world(m, world_to_canonical(m, x)) - x).norm());

        const SuperquadricModel d = i % 3 == 0 ? g.rigid_model() : i % 3 == 1 ? g.taper_model() : g.bend_model();
        const Vec3 pc = g.box(1.5).cwiseProduct(d.size);
        if (pc.norm() < 1e-3) continue;
        const RadialProjection r = radial_project(d, canonical_to_world(d, pc));
        surface = std::max(surface, std::abs(implicit_value(d.shape(), world_to_canonical(d, r.surface_point)) - 1.0));
    }
    const double secs = seconds_since(start);
    const bool pass = implicit < kImplicitTol && taper < kRoundTripTol && bend < kRoundTripTol &&
                      rigid < kRoundTripTol && surface < kOnSurfaceTol && secs < kGeometrySeconds;
    return {pass, fmt("%d draws each; |F-1| %.1e, taper %.1e, bend %.1e, rigid %.1e, on-surface %.1e; %.2f s",
                      kGeometryDraws, implicit, taper, bend, rigid, surface, secs)};
}

Verdict fuzzy_gap_verifier() {
    Gen g(1008);
    int ordered = 0, small = 0;
    double worst_ratio = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Vec3 x = g.box(1.0);
        const std::vector<Vec3> c{g.box(3.0), g.box(3.0), g.box(3.0)};
        const Prop1Gap a = prop1_gap(x, c, 1.001), b = prop1_gap(x, c, 1.01), d = prop1_gap(x, c, 1.1);
        if (a.log_gap < b.log_gap && b.log_gap < d.log_gap) ++ordered;
        const double ratio = std::exp(a.log_gap) / a.min_dist_sq;
        worst_ratio = std::max(worst_ratio, ratio);
        if (ratio < kGapRatio) ++small;
    }
    return {ordered == 100 && small == 100,
            fmt("ordered %d/100, gap/min_dist_sq < %.0e in %d/100 (worst %.2e)", ordered, kGapRatio, small,
                worst_ratio)};
}

Verdict optimality_oracles() {
    Gen g(1009);
    int u_wins = 0, sigma_wins = 0;
    for (int k = 0; k < kOracleInstances; ++k) {
        const int m = g.integer(2, 50);
        const double lambda = g.uniform(0.5, 5.0);
        const double sigma2 = std::exp(g.uniform(-4, 1));
        std::vector<double> r(m);
        for (auto& x : r) x = std::abs(g.normal(0, std::sqrt(sigma2) * 2));
        const auto u = raw_membership(r, sigma2, lambda);
        const double best = objective(u, r, sigma2, lambda);
        bool all = true;
        std::vector<double> other(m);
        for (int t = 0; t < kRandomMemberships && all; ++t) {
            for (auto& x : other) x = g.uniform(1e-12, 1.0);
            all = objective(other, r, sigma2, lambda) >= best;
        }
        u_wins += all;

        std::vector<double> w(m);
        for (auto& x : w) x = g.uniform(0.01, 1.0);
        const double s2 = update_sigma(w, r, 1e-12);
        const double f = objective(w, r, s2, lambda);
        sigma_wins += f <= objective(w, r, 0.9 * s2, lambda) && f <= objective(w, r, 1.1 * s2, lambda);
    }
    return {u_wins == kOracleInstances && sigma_wins == kOracleInstances,
            fmt("membership optimal in %d/%d, sigma^2 optimal in %d/%d", u_wins, kOracleInstances, sigma_wins,
                kOracleInstances)};
}

struct SolverCheck {
    bool reached = false;
    bool bounds = true;
    double distance = 0.0;
};

SolverCheck rosenbrock() {
    BoundedProblem p;
    p.residual = [](const Eigen::VectorXd& t) {
        Eigen::VectorXd r(2);
        r << 1.0 - t[0], 10.0 * (t[1] - t[0] * t[0]);
        return r;
    };
    p.lower = Eigen::Vector2d(-2, -2);
    p.upper = Eigen::Vector2d(2, 2);
    p.theta0 = Eigen::Vector2d(-1.2, 1.0);
    const SolverReport r = minimize(p);
    SolverCheck out;
    out.distance = (r.theta - Eigen::Vector2d(1, 1)).norm();
    out.reached = out.distance < kRosenbrockTol;
    out.bounds = r.bounds_respected;
    return out;
}

struct PerfCheck {
    double seconds = 0.0;
    bool bounds = true;
    std::size_t points = 0;
};

PerfCheck performance() {
    Rng rng(case_seed(1012, 0));
    const SuperquadricModel m = random_model(GenMode::Rigid, rng);
    const auto dense = sample_surface_count(m, kPerfPoints + kPerfPoints / 10).points;
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < kPerfPoints && i < dense.size(); ++i) pts.push_back(dense[i * dense.size() / kPerfPoints]);
    const auto start = Clock::now();
    const FitResult r = fit(pts);
    PerfCheck out;
    out.seconds = seconds_since(start);
    out.points = pts.size();
    for (const auto& run : r.runs) out.bounds = out.bounds && run.bounds_respected;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    init_logging();
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sqfit_acceptance";
    fs::create_directories(root);
    std::printf("kernels: %s\n", std::string(kernels::active().name).c_str());
    std::map<int, Verdict> verdicts;
    auto report = [&](int id, Verdict v) {
        std::printf("criterion %2d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
        verdicts[id] = std::move(v);
    };

    report(1, geometry_invariants());

    const std::vector<Group> groups = benchmark_groups();
    std::map<std::string, GroupResult> results;
    for (const auto& g : groups) {
        results[g.name] = run_group(root / "run1", g);
        std::printf("  ran %-16s %3zu fits in %6.1f s\n", g.name.c_str(), results[g.name].records.size(),
                    results[g.name].seconds);
        std::fflush(stdout);
    }

    {
        std::size_t fits = 0, monotone = 0, full = 0, converged = 0;
        double worst = -HUGE_VAL;
        for (const auto& g : groups) {
            for (const auto& c : results[g.name].records) {
                ++fits;
                monotone += c.loss_monotone;
                worst = std::max(worst, c.max_loss_increase);
                if (g.noise_free_full) {
                    ++full;
                    converged += c.status == "converged" && c.outer_iterations <= 50;
                }
            }
        }
        const double rate = static_cast<double>(converged) / static_cast<double>(std::max<std::size_t>(full, 1));
        const bool pass = fits >= 300 && monotone == fits && rate >= kConvergedFraction;
        report(2, {pass, fmt("%zu fits; non-increasing loss (tol %.0e) in %zu/%zu, largest rise %.3g; "
                             "noise-free full-data converged within 50 iterations %zu/%zu (%.1f%%)",
                             fits, kMonotoneTol, monotone, fits, worst, converged, full, 100.0 * rate)});
    }

    const auto r1 = normalized_errors(results["rigid_r1"]);
    {
        const double med = median_of(r1), mean = mean_of(r1), secs = results["rigid_r1"].seconds;
        report(3, {med < kRigidMedian && mean < kRigidMean && secs < kRigidSeconds,
                   fmt("100 rigid r=1 cases: median %.4g, mean %.4g (normalized); %.1f s", med, mean, secs)});
    }

    {
        const auto r05 = normalized_errors(results["rigid_r05"]), r03 = normalized_errors(results["rigid_r03"]);
        const double m05 = median_of(r05), m03 = median_of(r03);
        const bool trend = mean_of(r1) < mean_of(r03) && median_of(r1) < m03;
        report(4, {m05 < kOcclusionMedian && m03 < kOcclusionMedian && trend,
                   fmt("median r=0.5 %.4g, r=0.3 %.4g; mean r=1 %.4g vs r=0.3 %.4g", m05, m03, mean_of(r1),
                       mean_of(r03))});
    }

    {
        const auto e3 = normalized_errors(results["taper_lambda3"]);
        const auto e01 = normalized_errors(results["taper_lambda0.1"]);
        const double m3 = median_of(e3), m01 = median_of(e01);
        int lower = 0;
        for (std::size_t i = 0; i < e3.size(); ++i) lower += e3[i] < e01[i];
        report(5, {m3 < m01 && m3 < kTaperMedian,
                   fmt("20 taper k=1 cases: median lambda=3 %.6e, lambda=0.1 %.6e (difference %.1e); "
                       "lambda=3 lower in %d/%zu cases",
                       m3, m01, m01 - m3, lower, e3.size())});
    }

    {
        std::size_t total = 0, good = 0;
        std::string per_kappa;
        for (const auto& g : groups) {
            if (g.spec.mode != GenMode::Bend) continue;
            std::size_t k_good = 0;
            for (double e : normalized_errors(results[g.name])) {
                ++total;
                k_good += e < kBendThreshold;
            }
            good += k_good;
            per_kappa += fmt(" %s %zu/%zu", g.name.c_str() + 5, k_good, results[g.name].records.size());
        }
        const double frac = static_cast<double>(good) / static_cast<double>(total);
        report(6, {frac >= kBendFraction,
                   fmt("%zu/%zu bend fits below %.2g (%.0f%%);%s", good, total, kBendThreshold, 100 * frac,
                       per_kappa.c_str())});
    }

    {
        // Input units: the outlier box widens the normalization of the noisy
        // clouds, so normalized errors would not be comparable.
        const auto& noisy = results["rigid_outliers"].records;
        const auto& clean = results["rigid_r1"].records;
        std::vector<double> with, without;
        bool same_shapes = true;
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            with.push_back(noisy[i].status == "error" ? HUGE_VAL : noisy[i].error.mean);
            without.push_back(clean[i].error.mean);
            same_shapes = same_shapes && noisy[i].seed == clean[i].seed && noisy[i].num_inliers == clean[i].num_points;
        }
        const double mw = median_of(with), mc = median_of(without);
        report(7, {same_shapes && mw < kOutlierFactor * mc,
                   fmt("30 rigid cases, outlier ratio 0.3, w=0.1: inlier median %.4g vs clean %.4g (ratio %.2f)", mw,
                       mc, mw / mc)});
    }

    report(8, fuzzy_gap_verifier());
    report(9, optimality_oracles());

    const PerfCheck perf = performance();
    {
        const SolverCheck s = rosenbrock();
        std::size_t runs = 0, inside = 0;
        for (const auto& g : groups) {
            for (const auto& c : results[g.name].records) {
                ++runs;
                inside += c.bounds_respected;
            }
        }
        const bool pass = s.reached && s.bounds && perf.bounds && inside == runs;
        report(10, {pass, fmt("Rosenbrock |theta-(1,1)| %.2e; iterates inside bounds in %zu/%zu bench fits%s", s.distance,
                              inside, runs, perf.bounds ? "" : ", timing fit left the box")});
    }

    {
        std::size_t same = 0;
        std::string differing;
        for (const auto& g : groups) {
            const GroupResult again = run_group(root / "run2", g);
            if (again.csv == results[g.name].csv) ++same;
            else differing += " " + g.name;
        }
        report(11, {same == groups.size(), fmt("rerun of all %zu groups: %zu byte-identical per-case CSVs%s%s",
                                               groups.size(), same, differing.empty() ? "" : "; differ:",
                                               differing.c_str())});
    }

    report(12, {perf.seconds < kPerfSeconds, fmt("fit of %zu points in %.2f s", perf.points, perf.seconds)});

    int failed = 0;
    for (const auto& [id, v] : verdicts) failed += !v.pass;
    std::printf("%d/12 criteria passed\n", 12 - failed);
    return failed == 0 ? 0 : 1;
}
