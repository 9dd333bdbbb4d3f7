#include "slfv/driftload.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slfv/event_engine.hpp"
#include "slfv/grid.hpp"
#include "slfv/util.hpp"

namespace slfv {

double equilibrium_frequency(double s1, double s2, double nu1, double nu2) {
    SelectionModel model = SelectionModel::overdominance({s1, s2, nu1, nu2});
    double lo = 1e-9, hi = 1.0 - 1e-9;
    double flo = model.F(lo), fhi = model.F(hi);
    if (!(flo < 0.0 && fhi > 0.0))
        throw std::invalid_argument("equilibrium_frequency: F has no sign change on (0,1)");
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        if (model.F(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double drift_load_shape(int d, double delta) {
    switch (d) {
        case 1: return 1.0 / delta;
        case 2: return std::abs(std::log(delta * delta));
        case 3: return 1.0;
        default: throw std::invalid_argument("drift_load_shape: dimension must be 1, 2 or 3");
    }
}

void DriftLoadConfig::validate() const {
    if (d < 1 || d > 3) throw std::invalid_argument("drift load: dimension must be 1, 2 or 3");
    if (deltas.empty()) throw std::invalid_argument("drift load: empty delta sweep");
    if (!(sweep_exponent > 4.0))
        throw std::invalid_argument("drift load: sweep exponent must exceed 4 (eps = o(delta^4))");
    if (!(s1 > 0.0) || !(s2 > 0.0) || s1 + s2 + nu1 + nu2 >= 1.0)
        throw std::invalid_argument("drift load: need s1,s2 > 0 and s1+s2+nu1+nu2 < 1");
    if (!(nu1 > 0.0) || !(nu2 > 0.0))
        throw std::invalid_argument("drift load: mutation rates must be positive (no fixation)");
    if (nu1 + nu2 > 0.2 * (s1 + s2))
        throw std::invalid_argument("drift load: mutation must be small against selection");
    if (probes < 1 || replicates < 2)
        throw std::invalid_argument("drift load: need at least one probe and two replicates");
    for (double dl : deltas)
        if (!(dl > 0.0) || dl > 1.0)
            throw std::invalid_argument("drift load: deltas must lie in (0,1]");
}

namespace {

struct ProbeKernel {
    std::vector<std::size_t> cells;

    ProbeKernel(const TorusGrid& g, const BallKernel& kern, std::size_t center) {
        auto c0 = g.coords(center);
        cells.reserve(kern.count);
        for (const auto& o : kern.offsets)
            cells.push_back(g.index({c0[0] + o[0], c0[1] + o[1], c0[2] + o[2]}));
    }

    // <q>(x,R) - lambda; subtracting before summing keeps a field pinned at
    // lambda at exact zero.
    double deviation(const Field& q, double lambda) const {
        double s = 0.0;
        for (std::size_t c : cells) s += q.v[c] - lambda;
        return s / static_cast<double>(cells.size());
    }
};

}  // namespace

DriftLoadResult measure_drift_load(const DriftLoadConfig& cfg) {
    cfg.validate();
    const double lambda = equilibrium_frequency(cfg.s1, cfg.s2, cfg.nu1, cfg.nu2);
    SelectionModel model = SelectionModel::overdominance({cfg.s1, cfg.s2, cfg.nu1, cfg.nu2});
    const double fp_lambda = model.F_prime(lambda);
    if (!(fp_lambda > 0.0))
        throw std::invalid_argument("drift load: equilibrium is not attracting (F'(lambda) <= 0)");
    const double s_base = cfg.s1 + cfg.s2;
    const double vR = ball_volume(cfg.d, cfg.R);

    DriftLoadResult result;
    result.lambda = lambda;

    for (double delta : cfg.deltas) {
        const double eps = std::pow(delta, cfg.sweep_exponent);
        const double u_N = eps * cfg.u;
        const double s1_N = delta * delta * cfg.s1;
        const double s2_N = delta * delta * cfg.s2;
        const double nu1_N = delta * delta * cfg.nu1;
        const double nu2_N = delta * delta * cfg.nu2;
        const double s_N = s1_N + s2_N;

        // Relaxation rate of the linearized drift and the matching
        // correlation length; the torus must hold a few of the latter.
        const double relax_rate = u_N * vR * s_N * fp_lambda;
        // u = 0 is the degenerate no-op law; any finite window works.
        const double relax_time = relax_rate > 0.0 ? 1.0 / relax_rate : 1.0;
        const double corr_len =
            cfg.R * std::sqrt(2.0 / ((cfg.d + 2) * delta * delta * s_base * fp_lambda));
        const double h = cfg.R / cfg.cells_per_R;
        double want_L = std::max(20.0 * cfg.R, cfg.domain_corr_lengths * corr_len);
        int n = std::max(32, static_cast<int>(std::ceil(want_L / h)));
        TorusGrid grid(cfg.d, n, n * h);

        EventLaw law = EventLaw::diploid_law(u_N, s1_N, s2_N, nu1_N, nu2_N,
                                             RadiusLaw::fixed(cfg.R));

        // Probes on an evenly spaced lattice of cells.
        BallKernel kern(grid, cfg.R);
        std::vector<ProbeKernel> probes;
        int per_axis = cfg.d == 1 ? cfg.probes
                                  : std::max(1, static_cast<int>(std::round(
                                                    std::pow(cfg.probes, 1.0 / cfg.d))));
        if (cfg.d == 1) {
            for (int p = 0; p < cfg.probes; ++p)
                probes.emplace_back(grid, kern, grid.index({p * n / cfg.probes, 0, 0}));
        } else {
            for (int a = 0; a < per_axis; ++a)
                for (int b = 0; b < per_axis; ++b)
                    for (int c = 0; c < (cfg.d == 3 ? per_axis : 1); ++c)
                        probes.emplace_back(
                            grid, kern,
                            grid.index({a * n / per_axis, b * n / per_axis,
                                        cfg.d == 3 ? c * n / per_axis : 0}));
        }

        const double horizon = cfg.horizon_relaxations * relax_time;
        const double burn_in = cfg.burn_in_relaxations * relax_time;
        const double sample_dt = relax_time / cfg.samples_per_relaxation;
        std::vector<double> sample_times;
        for (double ts = burn_in; ts <= horizon * (1.0 + 1e-12); ts += sample_dt)
            sample_times.push_back(std::min(ts, horizon));

        struct RepStats {
            double mean_sq = 0.0;
            double q3 = 0.0, q4 = 0.0;
            double min_cell = 1.0, max_cell = 0.0;
        };
        std::vector<RepStats> stats(cfg.replicates);

        auto run_rep = [&](std::size_t rep) {
            Field q0(grid, lambda);
            TrajectoryOptions opts;
            opts.horizon = horizon;
            opts.sample_times = sample_times;
            opts.seed = cfg.seed;
            opts.stream = static_cast<std::uint64_t>(rep);
            opts.max_events = 5e10;

            std::vector<double> sq_means;
            sq_means.reserve(sample_times.size());
            RepStats& st = stats[rep];
            Observer obs{"probe-sq", [&](double, const Field& q) {
                              double acc = 0.0;
                              for (const auto& p : probes) {
                                  double diff = p.deviation(q, lambda);
                                  acc += diff * diff;
                              }
                              acc /= static_cast<double>(probes.size());
                              sq_means.push_back(acc);
                              return acc;
                          }};
            TrajectoryRecord rec = run_trajectory(q0, law, model, opts, std::span(&obs, 1));

            MeanVar mv = mean_var(sq_means);
            st.mean_sq = mv.mean;
            std::size_t half = sq_means.size() / 2;
            std::size_t q3_end = half + (sq_means.size() - half) / 2;
            MeanVar q3 = mean_var(std::span(sq_means).subspan(half, q3_end - half));
            MeanVar q4 = mean_var(std::span(sq_means).subspan(q3_end));
            st.q3 = q3.mean;
            st.q4 = q4.mean;
            for (double x : rec.final_field.v) {
                st.min_cell = std::min(st.min_cell, x);
                st.max_cell = std::max(st.max_cell, x);
            }
        };
        parallel_for_indexed(cfg.replicates, cfg.threads, run_rep);

        std::vector<double> rep_delta(cfg.replicates), rep_q3(cfg.replicates),
            rep_q4(cfg.replicates);
        DriftLoadRow row;
        for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
            rep_delta[rep] = s_N * stats[rep].mean_sq;
            rep_q3[rep] = s_N * stats[rep].q3;
            rep_q4[rep] = s_N * stats[rep].q4;
            row.min_cell_value = std::min(row.min_cell_value, stats[rep].min_cell);
            row.max_cell_value = std::max(row.max_cell_value, stats[rep].max_cell);
        }
        MeanVar mv = mean_var(rep_delta);
        row.delta = delta;
        row.eps = eps;
        row.s_N = s_N;
        row.horizon = horizon;
        row.domain = grid.length;
        row.replicates = cfg.replicates;
        row.estimate = mv.mean;
        row.se = mv.se_mean();
        row.ratio = mv.mean / (eps * delta * delta);
        row.c_model = drift_load_shape(cfg.d, delta);
        row.normalized = row.ratio / row.c_model;
        MeanVar mv3 = mean_var(rep_q3), mv4 = mean_var(rep_q4);
        row.quarter3 = mv3.mean;
        row.quarter4 = mv4.mean;
        row.quarter_se = std::sqrt(mv3.se_mean() * mv3.se_mean() + mv4.se_mean() * mv4.se_mean());
        result.rows.push_back(row);
    }

    if (result.rows.size() >= 2) {
        std::vector<double> lx, ly;
        for (const auto& row : result.rows) {
            lx.push_back(std::log(row.delta));
            ly.push_back(std::log(row.ratio));
        }
        result.fitted_slope = ols_slope(lx, ly);
        double lo = result.rows.front().normalized, hi = lo;
        for (const auto& row : result.rows) {
            lo = std::min(lo, row.normalized);
            hi = std::max(hi, row.normalized);
        }
        result.normalized_spread = hi / lo;
    }
    return result;
}

}  // namespace slfv
