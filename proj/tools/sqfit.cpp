// sqfit: fit, generate, eval and bench subcommands.
// Exit status: 0 success, 2 usage or input error, 1 internal error.

#include "sqfit/bench.hpp"
#include "sqfit/benchgen.hpp"
#include "sqfit/error.hpp"
#include "sqfit/fitting.hpp"
#include "sqfit/io.hpp"
#include "sqfit/log.hpp"
#include "sqfit/metrics.hpp"

#include "CLI11.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace sqfit;
using nlohmann::json;
namespace fs = std::filesystem;

struct FitFlags {
    std::string mode = "rigid";
    double lambda = 3.0;
    double w = 0.1;
    double tol = 1e-3;
    int max_iters = 50;
    bool no_multi_init = false;
    std::uint64_t seed = 0;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--mode", f.mode, "rigid, taper, bend, sphere, cylinder or ellipsoid")
        ->check(CLI::IsMember({"rigid", "taper", "bend", "sphere", "cylinder", "ellipsoid"}));
    cmd->add_option("--lambda", f.lambda, "entropy weight");
    cmd->add_option("--w", f.w, "outlier weight in [0, 1)");
    cmd->add_option("--tol", f.tol, "relative objective change for convergence");
    cmd->add_option("--max-iters", f.max_iters, "outer iteration cap");
    cmd->add_flag("--no-multi-init", f.no_multi_init, "fit from the first principal axis only");
    cmd->add_option("--seed", f.seed, "recorded in reports; the fit itself is deterministic");
}

FitConfig to_config(const FitFlags& f) {
    FitConfig c;
    c.mode = *parse_fit_mode(f.mode);
    c.lambda = f.lambda;
    c.outlier_weight = f.w;
    c.outer_tol = f.tol;
    c.max_outer_iters = f.max_iters;
    c.multi_init = !f.no_multi_init;
    validate(c);
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
    os << text;
    if (!os) throw Error(Errc::IoError, "failed writing " + path.string());
}

void emit_json(const std::string& out, const json& j) {
    if (out.empty()) std::cout << j.dump(2) << '\n';
    else write_json(out, j);
}

bool is_sphere(const SuperquadricModel& m) {
    return m.eps1 == 1.0 && m.eps2 == 1.0 && m.size.x() == m.size.y() && m.size.y() == m.size.z() &&
           std::holds_alternative<NoDeformation>(m.deformation);
}

json eval_json(const EvalReport& r, const char* metric) {
    return {{"metric", metric},       {"mean", r.mean},         {"median", r.median},
            {"p25", r.p25},           {"p75", r.p75},           {"sample_count", r.sample_count},
            {"point_count", r.point_count}};
}

int run(int argc, char** argv) {
    CLI::App app{"Superquadric fitting by fuzzy clustering"};
    app.require_subcommand(1);

    FitFlags fit_flags;
    std::string fit_in, fit_out, fit_surface, fit_report;
    auto* fit_cmd = app.add_subcommand("fit", "fit a superquadric to a point cloud");
    fit_cmd->add_option("input", fit_in, "point cloud (.xyz, .ply, .csv)")->required();
    fit_cmd->add_option("-o,--output", fit_out, "model JSON (stdout when omitted)");
    fit_cmd->add_option("--emit-surface", fit_surface, "write samples of the fitted surface");
    fit_cmd->add_option("--report", fit_report, "write a JSON fit report");
    add_fit_flags(fit_cmd, fit_flags);

    GenSpec gen;
    std::string gen_mode = "rigid", gen_out;
    double taper_k = 0.0, kappa = 0.0;
    auto* gen_cmd = app.add_subcommand("generate", "write a seeded synthetic case bundle");
    gen_cmd->add_option("-o,--out", gen_out, "output directory")->required();
    gen_cmd->add_option("--seed", gen.seed, "bundle seed");
    gen_cmd->add_option("--mode", gen_mode, "rigid, taper or bend")->check(CLI::IsMember({"rigid", "taper", "bend"}));
    gen_cmd->add_option("--partial", gen.partial_ratio, "visible fraction in (0, 1]");
    gen_cmd->add_option("--noise", gen.noise_sigma, "Gaussian noise standard deviation");
    gen_cmd->add_option("--outliers", gen.outlier_ratio, "outliers per inlier");
    gen_cmd->add_option("--count", gen.count, "number of cases");
    gen_cmd->add_option("--interval", gen.sample_interval, "surface sampling interval");
    auto* taper_opt = gen_cmd->add_option("--taper-k", taper_k, "fixed k1 = k2 for taper cases");
    auto* kappa_opt = gen_cmd->add_option("--kappa", kappa, "fixed curvature for bend cases");

    std::string eval_cloud, eval_model, eval_out;
    std::size_t eval_k = kDefaultSurfaceSamples;
    auto* eval_cmd = app.add_subcommand("eval", "distance of a cloud to a model surface");
    eval_cmd->add_option("cloud", eval_cloud, "point cloud")->required();
    eval_cmd->add_option("model", eval_model, "model JSON")->required();
    eval_cmd->add_option("--k", eval_k, "surface samples (>= 1000)");
    eval_cmd->add_option("-o,--output", eval_out, "report JSON (stdout when omitted)");

    FitFlags bench_flags;
    std::string bench_manifest, bench_out;
    std::size_t bench_jobs = 1, bench_k = kDefaultSurfaceSamples;
    auto* bench_cmd = app.add_subcommand("bench", "fit and evaluate every case of a bundle");
    bench_cmd->add_option("manifest", bench_manifest, "manifest.json of a bundle")->required();
    bench_cmd->add_option("-o,--out", bench_out, "output directory")->required();
    bench_cmd->add_option("--jobs", bench_jobs, "parallel cases");
    bench_cmd->add_option("--k", bench_k, "surface samples for the fit error");
    add_fit_flags(bench_cmd, bench_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (*fit_cmd) {
        const FitConfig config = to_config(fit_flags);
        const LoadedCloud cloud = read_cloud(fit_in);
        if (cloud.report.rejected_non_finite + cloud.report.rejected_malformed > 0)
            spdlog::warn("{}: rejected {} non-finite and {} malformed rows", fit_in, cloud.report.rejected_non_finite,
                         cloud.report.rejected_malformed);
        const auto start = std::chrono::steady_clock::now();
        const FitResult result = fit(cloud.points, config);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        emit_json(fit_out, model_to_json(result.model));
        if (!fit_surface.empty())
            write_cloud(fit_surface, sample_surface_count(result.model, kDefaultSurfaceSamples).points);
        if (!fit_report.empty()) {
            json runs = json::array();
            for (const auto& r : result.runs)
                runs.push_back({{"axis_assignment", r.axis_assignment},
                                {"status", std::string(to_string(r.status))},
                                {"loss_trace", r.loss_trace},
                                {"mean_residual", r.mean_residual}});
            write_json(fit_report, {{"input", fit_in},
                                    {"config", config_to_json(config)},
                                    {"seed", fit_flags.seed},
                                    {"points", cloud.points.size()},
                                    {"rejected_non_finite", cloud.report.rejected_non_finite},
                                    {"rejected_malformed", cloud.report.rejected_malformed},
                                    {"status", std::string(to_string(result.status))},
                                    {"iterations", result.loss_trace.size()},
                                    {"loss_trace", result.loss_trace},
                                    {"chosen_init", result.chosen_init},
                                    {"sigma2", result.final_state.sigma2},
                                    {"normalization",
                                     {{"scale", result.normalization.scale},
                                      {"offset",
                                       {result.normalization.offset.x(), result.normalization.offset.y(),
                                        result.normalization.offset.z()}}}},
                                    {"runs", runs},
                                    {"seconds", seconds},
                                    {"model", model_to_json(result.model)}});
        }
        return 0;
    }

    if (*gen_cmd) {
        gen.mode = *parse_gen_mode(gen_mode);
        if (*taper_opt) gen.taper_k = taper_k;
        if (*kappa_opt) gen.kappa = kappa;
        write_bundle(gen_out, gen);
        std::cout << (fs::path(gen_out) / "manifest.json").string() << '\n';
        return 0;
    }

    if (*eval_cmd) {
        if (eval_k < 1000) throw Error(Errc::InvalidK, "--k must be at least 1000");
        const LoadedCloud cloud = read_cloud(eval_cloud);
        const SuperquadricModel model = read_model(eval_model);
        if (is_sphere(model)) {
            emit_json(eval_out, eval_json(sphere_error(cloud.points, model.translation, model.size.x()), "sphere"));
        } else {
            emit_json(eval_out, eval_json(fit_error(cloud.points, model, eval_k), "surface-samples"));
        }
        return 0;
    }

    if (*bench_cmd) {
        BenchOptions options;
        options.fit = to_config(bench_flags);
        options.jobs = bench_jobs;
        options.eval_samples = bench_k;
        if (bench_k < 1000) throw Error(Errc::InvalidK, "--k must be at least 1000");
        const auto records = run_bench(bench_manifest, options);
        std::error_code ec;
        fs::create_directories(bench_out, ec);
        if (ec) throw Error(Errc::IoError, "cannot create " + bench_out);
        write_text(fs::path(bench_out) / "cases.csv", cases_csv(records));
        write_text(fs::path(bench_out) / "timings.csv", timings_csv(records));
        json summary = bench_summary(records, options);
        summary["manifest"] = bench_manifest;
        summary["seed"] = bench_flags.seed;
        summary["jobs"] = bench_jobs;
        write_json(fs::path(bench_out) / "summary.json", summary);
        std::cout << summary.dump(2) << '\n';
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    sqfit::init_logging();
    try {
        return run(argc, argv);
    } catch (const sqfit::Error& e) {
        std::fprintf(stderr, "sqfit: %s (%s)\n", e.what(), std::string(sqfit::to_string(e.code())).c_str());
        const bool internal =
            e.code() == sqfit::Errc::NonFiniteResidual || e.code() == sqfit::Errc::InvalidProblem;
        return internal ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "sqfit: internal error: %s\n", e.what());
        return 1;
    }
}
