#include "sqfit/bench.hpp"

#include "sqfit/error.hpp"
#include "sqfit/io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace sqfit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

json report_to_json(const EvalReport& r) {
    return {{"mean", r.mean}, {"median", r.median}, {"p25", r.p25}, {"p75", r.p75}};
}

json stats_of(std::vector<double> v) {
    if (v.empty()) return nullptr;
    const EvalReport r = summarize(std::move(v));
    return report_to_json(r);
}

}  // namespace

bool loss_trace_monotone(std::span<const double> trace, double tol) {
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace[i] - trace[i - 1] > tol * std::max(1.0, std::abs(trace[i - 1]))) return false;
    return true;
}

json config_to_json(const FitConfig& c) {
    return {{"mode", std::string(to_string(c.mode))},
            {"lambda", c.lambda},
            {"w", c.outlier_weight},
            {"tol", c.outer_tol},
            {"max_iters", c.max_outer_iters},
            {"multi_init", c.multi_init},
            {"sigma_floor", c.sigma_floor}};
}

CaseRecord run_case(std::size_t id, std::uint64_t seed, std::span<const Vec3> observed, std::size_t num_inliers,
                    const BenchOptions& options) {
    CaseRecord rec;
    rec.id = id;
    rec.seed = seed;
    rec.num_points = observed.size();
    rec.num_inliers = std::min(num_inliers, observed.size());
    const auto start = std::chrono::steady_clock::now();
    try {
        const FitResult fit = sqfit::fit(observed, options.fit);
        rec.status = std::string(to_string(fit.status));
        rec.outer_iterations = static_cast<int>(fit.loss_trace.size());
        rec.chosen_init = fit.chosen_init;
        rec.final_loss = fit.final_state.loss;
        rec.max_loss_increase = -HUGE_VAL;
        for (const auto& run : fit.runs) {
            rec.loss_monotone = rec.loss_monotone && loss_trace_monotone(run.loss_trace);
            rec.bounds_respected = rec.bounds_respected && run.bounds_respected;
            for (std::size_t i = 1; i < run.loss_trace.size(); ++i)
                rec.max_loss_increase = std::max(rec.max_loss_increase, run.loss_trace[i] - run.loss_trace[i - 1]);
        }
        if (rec.max_loss_increase == -HUGE_VAL) rec.max_loss_increase = 0.0;
        rec.model = model_to_json(fit.model);
        const auto inliers = observed.first(rec.num_inliers);
        std::vector<double> d = surface_distances(inliers, fit.model, options.eval_samples);
        std::vector<double> dn(d.size());
        std::transform(d.begin(), d.end(), dn.begin(), [&](double v) { return v * fit.normalization.scale; });
        rec.error = summarize(std::move(d));
        rec.error_normalized = summarize(std::move(dn));
    } catch (const Error& e) {
        rec.status = "error";
        rec.error = {};
        rec.error.mean = rec.error.median = rec.error.p25 = rec.error.p75 = NAN;
        rec.error_normalized = rec.error;
        rec.error_message = std::string(to_string(e.code())) + ": " + e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

std::vector<CaseRecord> run_bench(const fs::path& manifest_path, const BenchOptions& options) {
    validate(options.fit);
    const json manifest = read_json(manifest_path);
    if (!manifest.contains("cases") || !manifest["cases"].is_array())
        throw Error(Errc::SchemaViolation, "cases: missing");
    const json& cases = manifest["cases"];
    if (cases.empty()) throw Error(Errc::InvalidConfig, "manifest lists no cases");
    const fs::path dir = manifest_path.parent_path();

    struct Job {
        std::size_t id;
        std::uint64_t seed;
        fs::path cloud;
        fs::path truth;
    };
    std::vector<Job> jobs;
    for (const auto& c : cases) {
        try {
            jobs.push_back({c.at("id").get<std::size_t>(), c.at("seed").get<std::uint64_t>(),
                            dir / c.at("cloud").get<std::string>(), dir / c.at("truth").get<std::string>()});
        } catch (const json::exception& e) {
            throw Error(Errc::SchemaViolation, std::string("cases: ") + e.what());
        }
    }
    // Inputs are read up front so that input errors surface before any fit.
    std::vector<std::vector<Vec3>> clouds;
    std::vector<std::size_t> inliers;
    for (const auto& job : jobs) {
        clouds.push_back(read_cloud(job.cloud).points);
        const json truth = read_json(job.truth);
        inliers.push_back(truth.value("num_inliers", clouds.back().size()));
    }

    std::vector<CaseRecord> records(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            records[i] = run_case(jobs[i].id, jobs[i].seed, clouds[i], inliers[i], options);
            spdlog::info("case {}: {} error {:.4g}", jobs[i].id, records[i].status, records[i].error.mean);
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(options.jobs, 1, jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return records;
}

std::string cases_csv(std::span<const CaseRecord> records) {
    std::ostringstream os;
    os << "id,seed,num_points,num_inliers,status,outer_iterations,chosen_init,final_loss,loss_monotone,"
          "max_loss_increase,bounds_respected,err_mean,err_median,err_p25,err_p75,err_norm_mean,err_norm_median,"
          "err_norm_p25,err_norm_p75\n";
    for (const auto& r : records) {
        os << r.id << ',' << r.seed << ',' << r.num_points << ',' << r.num_inliers << ',' << r.status << ','
           << r.outer_iterations << ',' << r.chosen_init << ',' << fmt_double(r.final_loss) << ','
           << (r.loss_monotone ? 1 : 0) << ',' << fmt_double(r.max_loss_increase) << ','
           << (r.bounds_respected ? 1 : 0) << ',' << fmt_double(r.error.mean) << ',' << fmt_double(r.error.median)
           << ',' << fmt_double(r.error.p25) << ',' << fmt_double(r.error.p75) << ','
           << fmt_double(r.error_normalized.mean) << ',' << fmt_double(r.error_normalized.median) << ','
           << fmt_double(r.error_normalized.p25) << ',' << fmt_double(r.error_normalized.p75) << '\n';
    }
    return os.str();
}

std::string timings_csv(std::span<const CaseRecord> records) {
    std::ostringstream os;
    os << "id,seconds\n";
    for (const auto& r : records) os << r.id << ',' << fmt_double(r.seconds) << '\n';
    return os.str();
}

json bench_summary(std::span<const CaseRecord> records, const BenchOptions& options) {
    std::vector<double> mean_err, mean_err_norm, seconds;
    std::size_t converged = 0, monotone = 0, failed = 0;
    for (const auto& r : records) {
        seconds.push_back(r.seconds);
        if (r.status == "error") {
            ++failed;
            continue;
        }
        mean_err.push_back(r.error.mean);
        mean_err_norm.push_back(r.error_normalized.mean);
        if (r.status == "converged") ++converged;
        if (r.loss_monotone) ++monotone;
    }
    const double n = static_cast<double>(records.size());
    return {{"config", config_to_json(options.fit)},
            {"eval_samples", options.eval_samples},
            {"cases", records.size()},
            {"failed", failed},
            {"convergence_rate", static_cast<double>(converged) / n},
            {"monotone_rate", static_cast<double>(monotone) / n},
            {"error", stats_of(mean_err)},
            {"error_normalized", stats_of(mean_err_norm)},
            {"mean_seconds", std::accumulate(seconds.begin(), seconds.end(), 0.0) / n}};
}

}  // namespace sqfit
