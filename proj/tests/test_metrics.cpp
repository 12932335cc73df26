#include "sqfit/error.hpp"
#include "sqfit/metrics.hpp"
#include "sqfit/nearest.hpp"
#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace sqfit {
namespace {

using testing::Gen;
using testing::LD;

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no exception";
    return Errc::IoError;
}

TEST(Quantile, LinearInterpolation) {
    const std::vector<double> v{1, 2, 3, 4, 10};
    EXPECT_EQ(quantile_sorted(v, 0.0), 1.0);
    EXPECT_EQ(quantile_sorted(v, 1.0), 10.0);
    EXPECT_EQ(quantile_sorted(v, 0.5), 3.0);
    EXPECT_EQ(quantile_sorted(v, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.875), 4.0 + 0.5 * 6.0);
    const std::vector<double> two{0, 1};
    EXPECT_DOUBLE_EQ(quantile_sorted(two, 0.3), 0.3);
}

TEST(Summarize, Statistics) {
    const EvalReport r = summarize({4, 1, 3, 2});
    EXPECT_DOUBLE_EQ(r.mean, 2.5);
    EXPECT_DOUBLE_EQ(r.median, 2.5);
    EXPECT_DOUBLE_EQ(r.p25, 1.75);
    EXPECT_DOUBLE_EQ(r.p75, 3.25);
    EXPECT_EQ(r.point_count, 4u);
}

TEST(Nearest, MatchesBruteForce) {
    Gen g(61);
    for (int k = 0; k < 20; ++k) {
        std::vector<Vec3> targets, queries;
        const int n = g.integer(1, 2000);
        const double spread = std::exp(g.uniform(-5, 3));
        for (int i = 0; i < n; ++i) targets.push_back(g.box(spread).cwiseProduct(Vec3(1, g.uniform(0, 1), 0.1)));
        for (int i = 0; i < 200; ++i) queries.push_back(g.box(2 * spread));
        const std::vector<double> got = nearest_distances(queries, targets);
        for (std::size_t q = 0; q < queries.size(); ++q) {
            double best = HUGE_VAL;
            for (const auto& t : targets) best = std::min(best, (queries[q] - t).squaredNorm());
            ASSERT_EQ(got[q], std::sqrt(best));
        }
    }
}

TEST(Nearest, EmptyTargets) {
    const std::vector<Vec3> none;
    EXPECT_EQ(NearestGrid(none).nearest_sq(Vec3::Zero()), HUGE_VAL);
}

TEST(FitError, SurfacePointsScoreBelowTwoSpacings) {
    Gen g(62);
    for (int k = 0; k < 5; ++k) {
        const SuperquadricModel m = k % 2 ? g.taper_model(0.3) : g.rigid_model(0.3);
        std::vector<Vec3> pts;
        for (int i = 0; i < 500; ++i)
            pts.push_back(canonical_to_world(m, parametric_point(m.shape(), g.uniform(-1.5, 1.5), g.uniform(-3.1, 3.1))));
        const double spacing = sample_surface_count(m, 10000).spacing;
        EXPECT_LT(fit_error(pts, m, 10000).mean, 2 * spacing);
    }
}

TEST(FitError, ShiftedSphereBound) {
    SuperquadricModel m;
    Gen g(63);
    std::vector<Vec3> pts;
    for (int i = 0; i < 2000; ++i) pts.push_back(g.direction() + Vec3(0.001, 0, 0));
    const EvalReport r = fit_error(pts, m, 10000);
    const double spacing = sample_surface_count(m, 10000).spacing;
    EXPECT_GE(r.mean, 0.0);
    EXPECT_LE(r.mean, 0.001 + spacing);
    EXPECT_EQ(r.point_count, 2000u);
    EXPECT_NEAR(static_cast<double>(r.sample_count), 10000.0, 500.0);
}

TEST(FitError, TwoThousandPointsUnderOneSecond) {
    Gen g(64);
    const SuperquadricModel m = g.rigid_model();
    std::vector<Vec3> pts;
    for (int i = 0; i < 2000; ++i) pts.push_back(m.translation + g.box(3.0));
    const auto start = std::chrono::steady_clock::now();
    fit_error(pts, m, 10000);
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(FitError, RejectsSmallK) {
    const std::vector<Vec3> pts{Vec3::Zero()};
    EXPECT_EQ(code_of([&] { fit_error(pts, SuperquadricModel{}, 999); }), Errc::InvalidK);
}

TEST(FitError, InvariantUnderJointRigidMotion) {
    Gen g(65);
    for (int k = 0; k < 5; ++k) {
        SuperquadricModel m = g.rigid_model(0.3);
        std::vector<Vec3> pts;
        for (int i = 0; i < 300; ++i) pts.push_back(m.translation + g.box(2.5));
        const double before = fit_error(pts, m, 20000).mean;
        const Mat3 r = rotation_from_euler(Vec3(g.uniform(-3, 3), g.uniform(-1.5, 1.5), g.uniform(-3, 3)));
        const Vec3 t = g.box(5.0);
        SuperquadricModel moved = m;
        moved.euler = euler_from_rotation(r * m.rotation());
        moved.translation = r * m.translation + t;
        for (auto& p : pts) p = r * p + t;
        const double spacing = sample_surface_count(m, 20000).spacing;
        EXPECT_NEAR(fit_error(pts, moved, 20000).mean, before, spacing);
    }
}

TEST(FitError, OwnSamplesApproachZero) {
    Gen g(66);
    for (int k = 0; k < 4; ++k) {
        const SuperquadricModel m = k % 2 ? g.bend_model(0.3) : g.rigid_model(0.3);
        const std::vector<Vec3> pts = sample_surface(m, 0.137).points;
        EXPECT_GT(fit_error(pts, m, 1000).mean, fit_error(pts, m, 10000).mean);
    }
}

TEST(Sphere, Distance) {
    EXPECT_EQ(point_to_sphere_distance(Vec3(2, 0, 0), Vec3::Zero(), 1.0), 1.0);
    EXPECT_NEAR(point_to_sphere_distance(Vec3(0.6, 0.8, 0), Vec3::Zero(), 1.0), 0.0, 1e-16);
    EXPECT_EQ(point_to_sphere_distance(Vec3(1, 2, 3), Vec3(1, 2, 3), 2.5), 2.5);
    const std::vector<Vec3> pts{{2, 0, 0}, {0, 0.5, 0}, {0, 0, 1}};
    const EvalReport r = sphere_error(pts, Vec3::Zero(), 1.0);
    EXPECT_DOUBLE_EQ(r.mean, 0.5);
    EXPECT_DOUBLE_EQ(r.median, 0.5);
    EXPECT_EQ(r.sample_count, 0u);
}

/// (sum_j d_j^(-v))^(-1/v) with v = 1/(r - 1), d_j squared distances.
LD weighted_sum_reference(const std::vector<LD>& d, LD r) {
    const LD v = 1.0L / (r - 1.0L);
    const LD m = *std::min_element(d.begin(), d.end());
    LD s = 0;
    for (LD x : d) s += std::pow(m / x, v);
    return m * std::pow(s, -1.0L / v);
}

TEST(FuzzyGap, EquidistantPair) {
    const std::vector<Vec3> c{{1, 0, 0}, {-1, 0, 0}};
    for (double r : {1.001, 1.1, 1.5, 2.0, 3.0}) {
        const Prop1Gap g = prop1_gap(Vec3::Zero(), c, r);
        EXPECT_NEAR(g.weighted_sum, std::pow(2.0, 1.0 - r), 1e-14);
        EXPECT_EQ(g.min_dist_sq, 1.0);
        EXPECT_NEAR(std::exp(g.log_gap), 1.0 - std::pow(2.0, 1.0 - r), 1e-14);
    }
}

TEST(FuzzyGap, DistancesOneTwoThree) {
    const std::vector<Vec3> c{{1, 0, 0}, {0, 2, 0}, {0, 0, -3}};
    const Prop1Gap g = prop1_gap(Vec3::Zero(), c, 1.001);
    EXPECT_LT(g.gap(), 1e-2);
    EXPECT_GE(g.gap(), 0.0);
    const double g15 = prop1_gap(Vec3::Zero(), c, 1.5).log_gap;
    const double g101 = prop1_gap(Vec3::Zero(), c, 1.01).log_gap;
    const double g1001 = g.log_gap;
    EXPECT_GT(g15, g101);
    EXPECT_GT(g101, g1001);
}

TEST(FuzzyGap, MatchesReferenceAndSandwich) {
    Gen g(67);
    for (int k = 0; k < 500; ++k) {
        const int n = g.integer(2, 6);
        std::vector<Vec3> c;
        const Vec3 x = g.box(1.0);
        for (int j = 0; j < n; ++j) c.push_back(g.box(3.0));
        const double r = 1.0 + std::exp(g.uniform(std::log(1e-3), std::log(2.0)));
        std::vector<LD> d;
        for (const auto& cj : c) d.push_back((x - cj).squaredNorm());
        const Prop1Gap got = prop1_gap(x, c, r);
        const LD ref = weighted_sum_reference(d, r);
        EXPECT_NEAR(got.weighted_sum, static_cast<double>(ref), 1e-11 * static_cast<double>(ref));
        const LD v = 1.0L / (r - 1.0L);
        const LD mn = *std::min_element(d.begin(), d.end());
        EXPECT_LE(static_cast<double>(mn / std::pow(LD(n), 1.0L / v)), got.weighted_sum * (1 + 1e-12));
        EXPECT_LE(got.weighted_sum, static_cast<double>(mn) * (1 + 1e-12));
        const LD gap = mn - ref;
        if (gap > 1e-12L * mn) {
            EXPECT_NEAR(got.log_gap, static_cast<double>(std::log(gap)), 1e-6);
        }
    }
}

TEST(FuzzyGap, Errors) {
    const std::vector<Vec3> one{{1, 0, 0}};
    const std::vector<Vec3> two{{1, 0, 0}, {0, 1, 0}};
    EXPECT_EQ(code_of([&] { prop1_gap(Vec3::Zero(), one, 1.5); }), Errc::InvalidConfig);
    EXPECT_EQ(code_of([&] { prop1_gap(Vec3::Zero(), two, 1.0); }), Errc::InvalidConfig);
    EXPECT_EQ(code_of([&] { prop1_gap(Vec3(1, 0, 0), two, 1.5); }), Errc::CoincidentCentroid);
}

}  // namespace
}  // namespace sqfit
