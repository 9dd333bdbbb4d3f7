#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slfv/event_engine.hpp"
#include "slfv/grid.hpp"
#include "slfv/model.hpp"
#include "slfv/scaling.hpp"
#include "slfv/solvers.hpp"

namespace slfv {

// Genetic-drift covariance kernel of the haploid process at radius r,
// evaluated between two cells by cell quadrature over the ball overlap.
double sigma_kernel(const Field& q, std::size_t z1, std::size_t z2, double r);

// Diploid analogue; on constant fields rho = sigma / 2 at the diagonal.
double rho_kernel(const Field& q, std::size_t z1, std::size_t z2, double r);

// Stable-regime kernel: integral of V_r^2 sigma^{(r)} against the Pareto
// radius measure from max(delta, |z1-z2|/2) up to the cutoff.
double sigma_stable_kernel(const Field& q, std::size_t z1, std::size_t z2, double alpha,
                           double delta, const RadialQuadOptions& opts = {});

// K_alpha(z1,z2): spatial covariance of the stable-regime noise. Computed
// by quadrature of the pair-coverage integral; exactly homogeneous of
// degree -alpha by construction.
double k_alpha(int d, double dist, double alpha);

// [f]_alpha(z1,z2): probability that the offspring of an event covering
// both points is type a; a radius-weighted average of <f> over the overlap.
double alpha_average(const Field& f, std::size_t z1, std::size_t z2, double alpha,
                     const RadialQuadOptions& opts = {});

// Double integrals of phi x phi against the kernels, reduced to a single
// x-sum of ball averages (exact rearrangements of the banded double sum):
//   sigma: int <q>.<(1-q)phi>^2 + (1-<q>).<q phi>^2 dx
double sigma_pairing(const Field& q, const Field& phi, double r);
double rho_pairing(const Field& q, const Field& phi, double r);
// int dr/r^{d+a+1} V_r^2 * (sigma pairing at radius r), from delta up.
double sigma_stable_pairing(const Field& q, const Field& phi, double alpha, double delta,
                            const RadialQuadOptions& opts = {});
// Same but with the limiting K_alpha correlation structure (delta -> 0
// replaced by a quadrature floor).
double stable_limit_noise_pairing(const Field& f, const Field& phi, double alpha, double delta0,
                                  const RadialQuadOptions& opts = {});

struct FluctuationField {
    std::vector<double> times;
    std::vector<Field> z;
    double normalization = 1.0;
};

// Z^N_t = normalization * (rescaled field - centering), cell-wise at
// matching times. Normalization is (eps delta^{d-2})^{-1/2} in the Brownian
// regime and eps^{-1/2} in the stable regime.
FluctuationField extract_fluctuations(const std::vector<double>& times,
                                      const std::vector<Field>& rescaled_fields,
                                      const PdeSolution& centering, const ScalingParams& sc);

enum class NoiseModel : std::uint8_t {
    white,   // limiting f(1-f) white-noise density
    kernel,  // finite-N sigma kernel at r_N (or the stable kernel)
};

struct VarianceOracleOptions {
    NoiseModel noise = NoiseModel::kernel;
    OperatorLevel backward_level = OperatorLevel::discrete;
    int time_nodes = 65;
    SolverOptions solver;
};

// Var <z_t, phi> for the limiting fluctuation SPDE: the time integral of
// the noise functional applied to the backward test function phi(., s, t).
double spde_variance_oracle(const Field& phi, const PdeSolution& f_sol, const ScalingParams& sc,
                            const SelectionModel& model, double t,
                            const VarianceOracleOptions& opts = {});

struct MartingaleEstimate {
    std::string statistic;
    double window = 0.0;
    std::size_t replicates = 0;
    // Compensated increment of <q_t, phi>: mean should vanish.
    double drift_estimate = 0.0;
    double drift_se = 0.0;
    double drift_z = 0.0;
    // Variance of the compensated increment against the kernel oracle.
    double qv_estimate = 0.0;
    double qv_se = 0.0;
    double qv_oracle = 0.0;
    double qv_z = 0.0;
    double eta_N = 0.0;
    double tau_N = 0.0;
};

struct ResidualCheckConfig {
    Field q0;
    EventLaw law;
    SelectionModel model = SelectionModel::genic();
    Field phi;
    double window = 1.0;
    std::size_t replicates = 200;
    std::uint64_t seed = 0;
    int threads = 1;
    ScalingParams normalization;  // only eta/tau are reported from here
};

// Runs an ensemble over a short window, accumulating the exact drift
// compensator along each trajectory (the field is constant between events),
// and compares the compensated increments against the kernel oracle
// evaluated at the initial condition. Fixed-radius laws only.
MartingaleEstimate martingale_residual_check(const ResidualCheckConfig& cfg);

// Expected one-event increment of <q,phi> under the law, for a constant
// initial field w. Exact: on constants the migration term vanishes by mass
// conservation and E[ball mass] equals the continuum ball volume.
double one_event_drift_oracle(const EventLaw& law, const SelectionModel& model, double w,
                              const Field& phi, const TorusGrid& grid);

// Expected one-event squared increment on a constant field, via the
// sigma/rho pairing with continuum overlap volumes.
double one_event_qv_oracle(const EventLaw& law, const SelectionModel& model, double w,
                           const Field& phi, const TorusGrid& grid,
                           int radial_nodes_per_decade = 96);

}  // namespace slfv
