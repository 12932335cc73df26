#pragma once

// Batch fit + evaluation over a generated case bundle.

#include "sqfit/fitting.hpp"
#include "sqfit/metrics.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sqfit {

struct BenchOptions {
    FitConfig fit{};
    std::size_t jobs = 1;
    std::size_t eval_samples = kDefaultSurfaceSamples;
};

struct CaseRecord {
    std::size_t id = 0;
    std::uint64_t seed = 0;
    std::size_t num_points = 0;
    std::size_t num_inliers = 0;
    /// "converged", "max-iters" or "error".
    std::string status;
    std::string error_message;
    int outer_iterations = 0;
    int chosen_init = 0;
    double final_loss = 0.0;
    /// Every initialization's loss trace was non-increasing.
    bool loss_monotone = true;
    /// Largest step-to-step loss increase over all initializations (<= 0
    /// when monotone).
    double max_loss_increase = 0.0;
    bool bounds_respected = true;
    /// Fit error of the inliers in input units and in the fitter's
    /// normalized units (input units times the normalization scale).
    EvalReport error;
    EvalReport error_normalized;
    double seconds = 0.0;
    nlohmann::json model;
};

/// True when no step of `trace` rises by more than tol * max(1, |previous|).
bool loss_trace_monotone(std::span<const double> trace, double tol = 1e-10);

/// Fits `observed` and scores the first `num_inliers` points against the fit.
CaseRecord run_case(std::size_t id, std::uint64_t seed, std::span<const Vec3> observed, std::size_t num_inliers,
                    const BenchOptions& options);

/// Cases listed in manifest.json, run with up to options.jobs workers.
/// Throws Errc::InvalidConfig for an empty manifest.
std::vector<CaseRecord> run_bench(const std::filesystem::path& manifest, const BenchOptions& options);

/// Per-case CSV; contains no timings so reruns are byte-identical.
std::string cases_csv(std::span<const CaseRecord> records);
std::string timings_csv(std::span<const CaseRecord> records);

nlohmann::json bench_summary(std::span<const CaseRecord> records, const BenchOptions& options);

nlohmann::json config_to_json(const FitConfig& config);

}  // namespace sqfit
