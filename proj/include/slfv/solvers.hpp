#pragma once

#include <functional>
#include <string>
#include <vector>

#include "slfv/grid.hpp"
#include "slfv/model.hpp"
#include "slfv/scaling.hpp"

namespace slfv {

// L^{(r)} phi = (d+2)/(2 r^2) (<<phi>>_r - phi): the generator of the
// ball-walk, normalized so it approaches (1/2) Laplacian as r -> 0.
Field ball_laplacian(const Field& phi, double r);

// Radial quadrature setup shared by the nonlocal operators: log-spaced
// nodes between delta and r_cut with the r^{-(alpha+1)} measure integrated
// exactly per interval, plus an analytic far-field term that treats every
// radius beyond r_cut as averaging to the torus mean.
struct RadialQuadOptions {
    double r_cut = 0.0;         // 0: auto (0.45 * torus side)
    int nodes_per_decade = 64;  // convergence knob
    bool analytic_tail = true;
};

// D^{(alpha,delta)} phi = V_1 int_delta^inf (<<phi>>_r - phi) r^{-(alpha+1)} dr.
// Annihilates constants and conserves mass; tail mass beyond r_cut is
// reported through tail_weight if given.
Field fractional_laplacian(const Field& phi, double alpha, double delta,
                           const RadialQuadOptions& opts = {}, double* tail_weight = nullptr);

// F^{(delta)}(f) = alpha int_1^inf <H(<f>)>(x, delta r) r^{-(alpha+1)} dr,
// a probability-weighted average over radii (total weight exactly 1).
Field averaged_reaction(const std::function<double(double)>& H, const Field& f, double alpha,
                        double delta, const RadialQuadOptions& opts = {});

// Same radial weighting applied to <G(<f>) <phi>>(x, delta r): the
// linearization of averaged_reaction around f in the direction phi.
Field averaged_reaction_linearized(const std::function<double(double)>& G, const Field& f,
                                   const Field& phi, double alpha, double delta,
                                   const RadialQuadOptions& opts = {});

struct SolverOptions {
    double dt = 0.0;      // 0: pick from the stability bound
    int snapshots = 129;  // stored time slices (ends inclusive)
    RadialQuadOptions radial;
};

struct PdeSolution {
    std::vector<double> times;
    std::vector<Field> fields;
    double dt = 0.0;
    std::string scheme;

    const Field& initial() const { return fields.front(); }
    const Field& final() const { return fields.back(); }
    // Linear interpolation between stored slices.
    Field at_time(double t) const;
};

// Forward centering equation at level N:
//   Brownian: df/dt = u V_R [ (2R^2/(d+2)) L^{(r_N)} f - s <F(<f>)>_{r_N} ]
//   stable:   df/dt = u [ D^{(alpha,delta_N)} f - (s V_1/alpha) F^{(delta_N)}(f) ]
PdeSolution solve_centering(const Field& w0, const ScalingParams& sc, const SelectionModel& model,
                            double T, const SolverOptions& opts = {});

// Limiting equation:
//   Brownian: df/dt = u V_R [ R^2/(d+2) Delta f - s F(f) ]   (central differences)
//   stable:   df/dt = u [ D^{(alpha)} f - (s V_1/alpha) F(f) ]  (delta -> 8h quadrature)
PdeSolution solve_limit_pde(const Field& w0, const ScalingParams& sc, const SelectionModel& model,
                            double T, const SolverOptions& opts = {});

enum class OperatorLevel { discrete, continuum };

// Drift of the linearized (fluctuation) equation around the centering f:
//   discrete Brownian:  u V_R [ (2R^2/(d+2)) L^{(r_N)} z - s <F'(<f>) <z>>_{r_N} ]
//   continuum Brownian: u V_R [ R^2/(d+2) Delta z - s F'(f) z ]
// and the stable analogues. The discrete form is symmetric, which makes the
// forward step and the backward test-function step exact adjoints.
Field linearized_drift(const Field& z, const Field& f, const ScalingParams& sc,
                       const SelectionModel& model, OperatorLevel level,
                       const RadialQuadOptions& radial = {});

struct BackwardSolution {
    std::vector<double> s_times;  // increasing, last entry = terminal time t
    std::vector<Field> fields;    // phi(., s, t) per node
    double dt = 0.0;

    Field at_time(double s) const;
};

// Solves the backward test-function equation d_s phi + A_s phi = 0 with
// phi(., t, t) given, where A_s is linearized_drift around f_sol at time s.
BackwardSolution solve_backward_testfn(const Field& phi, const PdeSolution& f_sol,
                                       const ScalingParams& sc, const SelectionModel& model,
                                       double t, OperatorLevel level,
                                       const SolverOptions& opts = {});

// G^{(r)}_t * phi for the compound-Poisson ball walk: Poisson-weighted sum
// of repeated double ball averages with jump rate (d+2)/(2 r^2). The atom
// at the origin is the k = 0 term and is kept exactly.
Field ball_walk_semigroup(const Field& phi, double r, double t, double tail_tol = 1e-12);

// f(t) = || < G^{(1)}_t * phi >(., 1) ||_2^2, the time kernel behind the
// dimension-dependent drift-load scaling.
double semigroup_l2_profile(const Field& phi, double t);

}  // namespace slfv
