#pragma once

#include <cstdint>
#include <vector>

#include "slfv/model.hpp"

namespace slfv {

// Unique interior root of the overdominance drift function F, located by
// bisection to 1e-12. Throws when F has no sign change on (0,1).
double equilibrium_frequency(double s1, double s2, double nu1, double nu2);

// Dimension-dependent shape c_N of the drift-load law:
// 1 for d >= 3, |log delta^2| for d = 2, 1/delta for d = 1.
double drift_load_shape(int d, double delta);

struct DriftLoadConfig {
    int d = 1;
    std::vector<double> deltas;   // sweep, decreasing
    double sweep_exponent = 4.2;  // eps = delta^p with p > 4
    double u = 1.0;
    double R = 1.0;
    double s1 = 0.5;
    double s2 = 0.45;
    double nu1 = 5e-3;
    double nu2 = 5e-3;
    // Horizon and equilibration cut, in units of the relaxation time
    // 1/(u_N V_R s_N F'(lambda)).
    double horizon_relaxations = 14.0;
    double burn_in_relaxations = 4.0;
    double samples_per_relaxation = 2.0;
    std::size_t replicates = 8;
    int probes = 8;
    double cells_per_R = 8.0;       // grid resolution: h = R / cells_per_R
    double domain_corr_lengths = 3.0;  // torus side: max(20 R, this x corr length)
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
};

struct DriftLoadRow {
    double delta = 0.0;
    double eps = 0.0;
    double s_N = 0.0;
    double horizon = 0.0;
    double domain = 0.0;
    std::size_t replicates = 0;
    double estimate = 0.0;  // Delta^N
    double se = 0.0;
    double ratio = 0.0;       // Delta^N / (eps delta^2)
    double normalized = 0.0;  // Delta^N / (eps delta^2 c_N)
    double c_model = 0.0;
    // Stationarity proxy: estimates over the last two quarters of the window.
    double quarter3 = 0.0;
    double quarter4 = 0.0;
    double quarter_se = 0.0;
    double min_cell_value = 1.0;
    double max_cell_value = 0.0;
};

struct DriftLoadResult {
    double lambda = 0.0;
    std::vector<DriftLoadRow> rows;
    // Least-squares slope of log(Delta/(eps delta^2)) against log(delta).
    double fitted_slope = 0.0;
    // max/min of the c_N-normalized ratios across the sweep.
    double normalized_spread = 0.0;
};

// Simulates the diploid-overdominance process at the equilibrium frequency
// for every delta in the sweep and estimates the local drift load
// (s1_N + s2_N) E[(<q>(x,R) - lambda)^2] by probe, time and replicate
// averaging over the equilibrated window.
DriftLoadResult measure_drift_load(const DriftLoadConfig& cfg);

}  // namespace slfv
