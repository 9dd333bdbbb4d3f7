#include "slfv/experiments.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "slfv/diagnostics.hpp"
#include "slfv/event_engine.hpp"
#include "slfv/solvers.hpp"
#include "slfv/util.hpp"

namespace slfv {

namespace {

namespace fs = std::filesystem;

std::uint64_t resolve_seed(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.seed) return *opts.seed;
    if (cfg.seed) return *cfg.seed;
    if (cfg.stochastic())
        throw std::invalid_argument(
            "stochastic experiments require an explicit seed (config key or --seed)");
    return 0;
}

std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    return out;
}

// Periodized radial Gaussian (smooth across the torus cut locus).
Field gaussian_profile(const TorusGrid& g, double sigma) {
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto x = g.cell_center(i);
        double acc = 0.0;
        for (int k = -1; k <= 1; ++k) {
            double s = 0.0;
            for (int dim = 0; dim < g.d; ++dim) {
                double diff = g.torus_delta(x[dim], 0.5 * g.length);
                if (dim == 0) diff += k * g.length;
                s += diff * diff;
            }
            acc += std::exp(-s / (2.0 * sigma * sigma));
        }
        f.v[i] = acc;
    }
    return f;
}

Field gaussian_laplacian(const TorusGrid& g, double sigma) {
    Field f(g);
    const double s2 = sigma * sigma;
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto x = g.cell_center(i);
        double acc = 0.0;
        for (int k = -1; k <= 1; ++k) {
            double s = 0.0;
            for (int dim = 0; dim < g.d; ++dim) {
                double diff = g.torus_delta(x[dim], 0.5 * g.length);
                if (dim == 0) diff += k * g.length;
                s += diff * diff;
            }
            acc += std::exp(-s / (2.0 * s2)) * (s / (s2 * s2) - g.d / s2);
        }
        f.v[i] = acc;
    }
    return f;
}

struct ArtifactSink {
    fs::path dir;
    RunManifest* manifest;

    fs::path file(const std::string& name) const {
        manifest->artifacts.push_back(name);
        return dir / name;
    }
};

void run_trajectory_experiment(const ExperimentConfig& cfg, const RunOptions& opts,
                               std::uint64_t seed, ArtifactSink& sink) {
    const TrajectorySetup& t = cfg.trajectory;
    Field q0 = make_profile(t.grid, t.w0);
    TrajectoryOptions topts;
    topts.horizon = t.horizon;
    topts.sample_times = linspace(0.0, t.horizon, t.samples);
    topts.keep_event_log = t.log_events;
    topts.seed = seed;

    std::vector<Observer> observers;
    observers.push_back({"mean", [](double, const Field& q) { return q.cell_mean(); }});
    observers.push_back({"min", [](double, const Field& q) {
                             double m = 1.0;
                             for (double x : q.v) m = std::min(m, x);
                             return m;
                         }});
    observers.push_back({"max", [](double, const Field& q) {
                             double m = 0.0;
                             for (double x : q.v) m = std::max(m, x);
                             return m;
                         }});
    TrajectoryRecord rec = run_trajectory(q0, t.law, t.model, topts, observers);

    write_field_snapshot(sink.file("final.slfv"), rec.final_field);
    CsvWriter csv(sink.file("trace.csv"), {"t", "mean", "min", "max"});
    for (std::size_t k = 0; k < rec.sample_times.size(); ++k)
        csv.row({rec.sample_times[k], rec.observations[0][k], rec.observations[1][k],
                 rec.observations[2][k]});
    csv.close();
    if (t.log_events) write_event_log_file(sink.file("events.slfvlog"), cfg.text, rec.event_log);
    if (rec.pareto_tail_fraction > 0.0)
        sink.manifest->warnings.push_back("pareto truncation mass fraction = " +
                                          format17(rec.pareto_tail_fraction));
    if (rec.radius_clamp_count > 0)
        sink.manifest->warnings.push_back("radius clamps = " +
                                          std::to_string(rec.radius_clamp_count));
    (void)opts;
}

void run_martingale_experiment(const ExperimentConfig& cfg, const RunOptions& opts,
                               std::uint64_t seed, ArtifactSink& sink) {
    const MartingaleSetup& m = cfg.martingale;
    ResidualCheckConfig rc;
    rc.q0 = Field(m.grid, m.w0);
    rc.law = m.law;
    rc.model = m.model;
    rc.phi = make_test_bump(m.grid, m.phi_center, m.phi_width);
    rc.window = m.window;
    rc.replicates = m.replicates;
    rc.seed = seed;
    rc.threads = opts.threads;
    MartingaleEstimate est = martingale_residual_check(rc);

    CsvWriter csv(sink.file("martingale.csv"),
                  {"statistic", "phi", "t", "estimate", "oracle", "se", "z"});
    std::string phi_name = "bump(" + format17(m.phi_center) + "," + format17(m.phi_width) + ")";
    csv.row_mixed({"drift", phi_name, format17(m.window), format17(est.drift_estimate),
                   format17(0.0), format17(est.drift_se), format17(est.drift_z)});
    csv.row_mixed({"quadratic-variation", phi_name, format17(m.window),
                   format17(est.qv_estimate), format17(est.qv_oracle), format17(est.qv_se),
                   format17(est.qv_z)});
    csv.close();
}

void run_clt_experiment(const ExperimentConfig& cfg, const RunOptions& opts, std::uint64_t seed,
                        ArtifactSink& sink) {
    const CltSetup& c = cfg.clt;
    const ScalingParams& sc = c.scaling;
    const TorusGrid& rg = c.grid;  // rescaled grid
    TorusGrid raw_grid(rg.d, rg.n, rg.length / sc.delta);

    Field w0 = make_profile(rg, c.w0);
    Field q0_raw(raw_grid);
    q0_raw.v = w0.v;  // q0(x) = w0(delta x), exact cell-for-cell
    Field phi = make_test_bump(rg, c.phi_center, c.phi_width);

    EventLaw law;
    if (sc.regime == Regime::brownian) {
        law = EventLaw::haploid(sc.u_N(), sc.s_N(), RadiusLaw::fixed(sc.R));
    } else {
        double r_max = c.stable_r_max > 0.0 ? c.stable_r_max : 0.25 * raw_grid.length;
        law = EventLaw::haploid(sc.u_N(), sc.s_N(), RadiusLaw::stable(sc.alpha, r_max));
    }

    const double raw_horizon = c.horizon / sc.eta_N();
    const double hd = std::pow(rg.h, rg.d);

    PdeSolution centering = solve_centering(w0, sc, c.model, c.horizon);
    const double f_pairing = pair_fields(centering.final(), phi);
    const double zscale = sc.fluctuation_scale(rg.d);

    std::vector<double> z_values(c.replicates);
    parallel_for_indexed(c.replicates, opts.threads, [&](std::size_t rep) {
        TrajectoryOptions topts;
        topts.horizon = raw_horizon;
        topts.seed = seed;
        topts.stream = rep;
        topts.max_events = 5e10;
        TrajectoryRecord rec = run_trajectory(q0_raw, law, c.model, topts);
        double q_pairing = hd * pairwise_dot(rec.final_field.v, phi.v);
        z_values[rep] = zscale * (q_pairing - f_pairing);
    });

    MeanVar mv = mean_var(z_values);
    VarianceOracleOptions oopts;
    oopts.noise = NoiseModel::kernel;
    oopts.backward_level = OperatorLevel::discrete;
    double oracle_kernel = spde_variance_oracle(phi, centering, sc, c.model, c.horizon, oopts);
    oopts.noise = NoiseModel::white;
    double oracle_white = spde_variance_oracle(phi, centering, sc, c.model, c.horizon, oopts);

    CsvWriter csv(sink.file("clt.csv"),
                  {"replicates", "mean", "var", "var_se", "oracle_kernel", "oracle_white",
                   "ratio_kernel", "ratio_white"});
    csv.row({static_cast<double>(c.replicates), mv.mean, mv.var, mv.se_var(), oracle_kernel,
             oracle_white, mv.var / oracle_kernel, mv.var / oracle_white});
    csv.close();

    CsvWriter zs(sink.file("z_samples.csv"), {"replicate", "z_pairing"});
    for (std::size_t rep = 0; rep < c.replicates; ++rep)
        zs.row({static_cast<double>(rep), z_values[rep]});
    zs.close();
}

void run_drift_load_experiment(const ExperimentConfig& cfg, const RunOptions& opts,
                               std::uint64_t seed, ArtifactSink& sink) {
    DriftLoadConfig dl = cfg.drift_load;
    dl.seed = seed;
    dl.threads = opts.threads;
    DriftLoadResult res = measure_drift_load(dl);

    CsvWriter csv(sink.file("driftload.csv"),
                  {"N", "d", "delta", "eps", "Delta", "SE", "ratio", "normalized", "c_model",
                   "quarter3", "quarter4", "quarter_se", "min_cell", "max_cell"});
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const DriftLoadRow& row = res.rows[i];
        csv.row({static_cast<double>(i + 1), static_cast<double>(dl.d), row.delta, row.eps,
                 row.estimate, row.se, row.ratio, row.normalized, row.c_model, row.quarter3,
                 row.quarter4, row.quarter_se, row.min_cell_value, row.max_cell_value});
    }
    csv.close();

    std::vector<double> xs, ys;
    for (const auto& row : res.rows) {
        xs.push_back(row.delta);
        ys.push_back(row.ratio);
    }
    emit_plot_data(sink.file("driftload_ratio.dat"), "drift load ratio vs delta", xs, ys, "delta",
                   "Delta/(eps*delta^2)");

    CsvWriter summary(sink.file("driftload_summary.csv"),
                      {"lambda", "fitted_slope", "normalized_spread"});
    summary.row({res.lambda, res.fitted_slope, res.normalized_spread});
    summary.close();
}

void run_operator_tests_experiment(const ExperimentConfig& cfg, ArtifactSink& sink) {
    const OperatorTestsSetup& ot = cfg.operator_tests;
    const TorusGrid& g = ot.grid;
    const double sigma = g.length / 8.0;
    Field phi = gaussian_profile(g, sigma);
    Field half_lap = gaussian_laplacian(g, sigma);
    for (double& x : half_lap.v) x *= 0.5;

    CsvWriter local(sink.file("operator_local.csv"), {"r", "sup_error", "order"});
    std::vector<double> errs, radii;
    for (double r : ot.radii) {
        // Snap to a half-integer cell multiple: keeps the stencil moments
        // O(h^2) so the order column reflects the operator, not the grid.
        double snapped = (std::round(r / g.h) + 0.5) * g.h;
        Field lhs = ball_laplacian(phi, snapped);
        double err = 0.0;
        for (std::size_t i = 0; i < lhs.size(); ++i)
            err = std::max(err, std::abs(lhs.v[i] - half_lap.v[i]));
        errs.push_back(err);
        radii.push_back(snapped);
        double order = errs.size() > 1 ? std::log(errs[errs.size() - 2] / err) /
                                             std::log(radii[radii.size() - 2] / snapped)
                                       : 0.0;
        local.row({snapped, err, order});
    }
    local.close();

    const double delta0 = 8.0 * g.h;
    Field oracle = fractional_laplacian(phi, ot.alpha, delta0);
    CsvWriter stable(sink.file("operator_stable.csv"), {"delta", "sup_error", "order"});
    std::vector<double> serrs;
    for (double dl : ot.deltas) {
        Field lhs = fractional_laplacian(phi, ot.alpha, dl);
        double err = 0.0;
        for (std::size_t i = 0; i < lhs.size(); ++i)
            err = std::max(err, std::abs(lhs.v[i] - oracle.v[i]));
        serrs.push_back(err);
        double order = serrs.size() > 1 ? std::log(serrs[serrs.size() - 2] / err) /
                                              std::log(ot.deltas[serrs.size() - 2] / dl)
                                        : 0.0;
        stable.row({dl, err, order});
    }
    stable.close();
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    auto t0 = std::chrono::steady_clock::now();
    std::uint64_t seed = resolve_seed(cfg, opts);

    fs::create_directories(opts.out_dir);
    RunManifest manifest;
    manifest.config_hash = cfg.hash;
    manifest.code_version = kCodeVersion;
    manifest.kind = cfg.kind_name;
    manifest.seed = seed;
    manifest.status = "running";
    write_manifest(opts.out_dir / "manifest.txt", manifest);

    ArtifactSink sink{opts.out_dir, &manifest};
    switch (cfg.kind) {
        case ExperimentKind::trajectory: run_trajectory_experiment(cfg, opts, seed, sink); break;
        case ExperimentKind::martingale_check:
            run_martingale_experiment(cfg, opts, seed, sink);
            break;
        case ExperimentKind::clt_fluctuations: run_clt_experiment(cfg, opts, seed, sink); break;
        case ExperimentKind::drift_load: run_drift_load_experiment(cfg, opts, seed, sink); break;
        case ExperimentKind::operator_tests: run_operator_tests_experiment(cfg, sink); break;
    }

    auto t1 = std::chrono::steady_clock::now();
    manifest.status = "complete";
    manifest.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    write_manifest(opts.out_dir / "manifest.txt", manifest);
    return manifest;
}

std::filesystem::path replay_run(const std::filesystem::path& log_path,
                                 const std::filesystem::path& out_dir) {
    EventLogFile log = read_event_log_file(log_path);
    ExperimentConfig cfg = parse_config(log.config_text);
    if (cfg.kind != ExperimentKind::trajectory)
        throw std::runtime_error("replay: only trajectory runs carry event logs");
    const TrajectorySetup& t = cfg.trajectory;
    Field q0 = make_profile(t.grid, t.w0);
    TrajectoryOptions topts;
    topts.horizon = t.horizon;
    TrajectoryRecord rec = replay_trajectory(q0, t.law, t.model, log.records, topts);
    fs::create_directories(out_dir);
    fs::path out = out_dir / "replay_final.slfv";
    write_field_snapshot(out, rec.final_field);
    return out;
}

}  // namespace slfv
