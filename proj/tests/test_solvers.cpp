#include <doctest.h>

#include <cmath>

#include "slfv/grid.hpp"
#include "slfv/model.hpp"
#include "slfv/rng.hpp"
#include "slfv/solvers.hpp"
#include "slfv/util.hpp"

using namespace slfv;

namespace {

// Periodized Gaussian: smooth on the torus (no kink at the cut locus).
Field gaussian_bump(const TorusGrid& g, double sigma) {
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        double x = g.torus_delta(g.cell_center(i)[0], 0.5 * g.length);
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
            double xi = x + k * g.length;
            acc += std::exp(-xi * xi / (2.0 * sigma * sigma));
        }
        f.v[i] = acc;
    }
    return f;
}

Field gaussian_bump_half_laplacian(const TorusGrid& g, double sigma) {
    Field f(g);
    const double s2 = sigma * sigma;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double x = g.torus_delta(g.cell_center(i)[0], 0.5 * g.length);
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
            double xi = x + k * g.length;
            acc += 0.5 * std::exp(-xi * xi / (2.0 * s2)) * (xi * xi / (s2 * s2) - 1.0 / s2);
        }
        f.v[i] = acc;
    }
    return f;
}

double sup_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

double logistic_decay(double w, double c, double t) {
    double e = std::exp(-c * t);
    return w * e / (1.0 - w + w * e);
}

}  // namespace

TEST_CASE("ball laplacian: constants, quadratic fields, Gaussian error order") {
    TorusGrid g(1, 8192, 8.0);
    Field c(g, 0.42);
    Field lc = ball_laplacian(c, 0.5);
    for (double x : lc.v) CHECK(std::abs(x) < 1e-12);

    // |x|^2 has (1/2) Laplacian = d; aligned radius keeps the grid error O(h^2).
    Field sq(g);
    for (std::size_t i = 0; i < sq.size(); ++i) {
        double x = g.torus_delta(g.cell_center(i)[0], 0.5 * g.length);
        sq.v[i] = x * x;
    }
    double r = (std::round(0.5 / g.h) + 0.5) * g.h;
    Field lsq = ball_laplacian(sq, r);
    for (int i = g.n / 4; i < 3 * g.n / 4; ++i)
        CHECK(std::abs(lsq.v[i] - 1.0) < 1e-3);

    const double sigma = 1.0;
    Field phi = gaussian_bump(g, sigma);
    Field half_lap = gaussian_bump_half_laplacian(g, sigma);
    // Radii on half-integer cell multiples keep the stencil moments O(h^2).
    std::vector<double> radii, errs;
    for (double target : {0.4, 0.2, 0.1}) {
        double rr = (std::round(target / g.h) + 0.5) * g.h;
        radii.push_back(rr);
        errs.push_back(sup_diff(ball_laplacian(phi, rr), half_lap));
    }
    for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
        double order = std::log(errs[k] / errs[k + 1]) / std::log(radii[k] / radii[k + 1]);
        CHECK(order > 1.9);
        CHECK(order < 2.1);
    }
    CHECK_THROWS(ball_laplacian(phi, 4.0 * g.h));  // resolution contract
}

TEST_CASE("fractional laplacian: constants, empty range, mass, delta order") {
    TorusGrid g(1, 2048, 8.0);
    Field c(g, 0.3);
    Field dc = fractional_laplacian(c, 0.5, 0.1);
    for (double x : dc.v) CHECK(std::abs(x) < 1e-13);

    Field phi = gaussian_bump(g, 0.5);
    RadialQuadOptions opts;
    opts.r_cut = 2.0;
    Field beyond = fractional_laplacian(phi, 0.5, 3.0, opts);
    for (double x : beyond.v) CHECK(x == 0.0);

    Field one(g, 1.0);
    Field dphi = fractional_laplacian(phi, 0.5, 0.1);
    CHECK(std::abs(pair_fields(dphi, one)) < 1e-10);

    // || D^{(a,delta)} - D^{(a)} ||_inf ~ delta^{2-a}: order in [1.3, 1.7].
    const double alpha = 0.5;
    Field oracle = fractional_laplacian(phi, alpha, 8.0 * g.h);
    std::vector<double> errs;
    std::vector<double> deltas{0.4, 0.2, 0.1};
    for (double dl : deltas) errs.push_back(sup_diff(fractional_laplacian(phi, alpha, dl), oracle));
    for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
        double order = std::log2(errs[k] / errs[k + 1]);
        CHECK(order > 1.3);
        CHECK(order < 1.7);
    }
}

TEST_CASE("averaged reaction: constants exact, zero function, delta^alpha error") {
    TorusGrid g(1, 1024, 8.0);
    auto H = [](double w) { return w * (1.0 - w); };
    Field c(g, 0.37);
    Field fc = averaged_reaction(H, c, 0.5, 0.2);
    for (double x : fc.v) CHECK(x == doctest::Approx(H(0.37)).epsilon(1e-13));

    Field f = gaussian_bump(g, 1.0);
    for (double& x : f.v) x = 0.2 + 0.6 * x;
    Field z = averaged_reaction([](double) { return 0.0; }, f, 0.5, 0.2);
    for (double x : z.v) CHECK(x == 0.0);

    Field direct(g);
    for (std::size_t i = 0; i < f.size(); ++i) direct.v[i] = H(f.v[i]);
    const double alpha = 0.5;
    std::vector<double> errs;
    std::vector<double> deltas{0.4, 0.2, 0.1};
    for (double dl : deltas) errs.push_back(sup_diff(averaged_reaction(H, f, alpha, dl), direct));
    // Error should shrink like delta^alpha (up to the direct-F residual).
    CHECK(errs[1] < errs[0]);
    CHECK(errs[2] < errs[1]);
    double order = std::log2(errs[0] / errs[2]) / 2.0;
    CHECK(order > 0.25 * alpha);
    CHECK(order < 2.0);
}

TEST_CASE("centering solver reproduces the logistic decay on constants") {
    TorusGrid g(1, 128, 8.0);
    ScalingParams sc;
    sc.regime = Regime::brownian;
    sc.eps = 1.0;
    sc.delta = 0.5;
    sc.u = 0.5;
    sc.s = 0.5;
    sc.R = 1.0;
    SelectionModel genic = SelectionModel::genic();
    const double w = 0.3;
    const double c = sc.u * ball_volume(1, sc.R) * sc.s;

    SolverOptions opts;
    opts.dt = 2e-4;
    PdeSolution sol = solve_centering(Field(g, w), sc, genic, 5.0, opts);
    double worst = 0.0;
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        double expect = logistic_decay(w, c, sol.times[k]);
        for (double x : sol.fields[k].v) worst = std::max(worst, std::abs(x - expect));
    }
    CHECK(worst < 1e-4);

    PdeSolution lim = solve_limit_pde(Field(g, w), sc, genic, 5.0, opts);
    worst = 0.0;
    for (std::size_t k = 0; k < lim.times.size(); ++k) {
        double expect = logistic_decay(w, c, lim.times[k]);
        for (double x : lim.fields[k].v) worst = std::max(worst, std::abs(x - expect));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("centering solver conserves mass without selection") {
    TorusGrid g(1, 256, 8.0);
    ScalingParams sc;
    sc.eps = 1.0;
    sc.delta = 0.25;
    sc.u = 0.5;
    sc.s = 0.0;
    sc.R = 1.0;
    Field w0 = gaussian_bump(g, 1.0);
    for (double& x : w0.v) x = 0.1 + 0.8 * x;
    PdeSolution sol = solve_centering(w0, sc, SelectionModel::genic(), 2.0);
    Field one(g, 1.0);
    double m0 = pair_fields(sol.initial(), one);
    for (const Field& f : sol.fields) CHECK(std::abs(pair_fields(f, one) - m0) < 1e-9);
}

TEST_CASE("overdominance equilibrium is a fixed point of the centering flow") {
    TorusGrid g(1, 128, 8.0);
    ScalingParams sc;
    sc.eps = 1.0;
    sc.delta = 0.5;
    sc.u = 0.5;
    sc.s = 1.0;
    sc.R = 1.0;
    SelectionModel over = SelectionModel::overdominance({0.02, 0.01, 0.0, 0.0});
    const double lambda = 0.01 / 0.03;
    PdeSolution sol = solve_centering(Field(g, lambda), sc, over, 5.0);
    for (double x : sol.final().v) CHECK(std::abs(x - lambda) < 1e-10);
}

TEST_CASE("stable centering fixes constants at the genic logistic rate") {
    // On constants the stable equation reduces to df/dt = -u (s V1/alpha) F(f).
    TorusGrid g(1, 128, 4.0);
    ScalingParams sc;
    sc.regime = Regime::stable;
    sc.eps = 1.0;
    sc.delta = 0.25;
    sc.u = 0.4;
    sc.s = 0.3;
    sc.alpha = 0.5;
    const double w = 0.4;
    const double c = sc.u * sc.s * ball_volume(1, 1.0) / sc.alpha;
    SolverOptions opts;
    opts.dt = 1e-3;
    opts.radial.nodes_per_decade = 16;
    PdeSolution sol = solve_centering(Field(g, w), sc, SelectionModel::genic(), 2.0, opts);
    double worst = 0.0;
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        double expect = logistic_decay(w, c, sol.times[k]);
        for (double x : sol.fields[k].v) worst = std::max(worst, std::abs(x - expect));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("backward test functions: degenerate configurations") {
    TorusGrid g(1, 128, 8.0);
    SelectionModel genic = SelectionModel::genic();
    Field phi = gaussian_bump(g, 0.8);

    // u = 0 freezes the generator: phi(s,t) = phi for all s.
    ScalingParams frozen;
    frozen.eps = 1.0;
    frozen.delta = 0.5;
    frozen.u = 0.0;
    frozen.s = 0.5;
    frozen.R = 1.0;
    PdeSolution f_sol = solve_centering(Field(g, 0.5), frozen, genic, 1.0);
    BackwardSolution bs =
        solve_backward_testfn(phi, f_sol, frozen, genic, 1.0, OperatorLevel::discrete);
    CHECK(sup_diff(bs.at_time(0.0), phi) < 1e-12);
    CHECK(sup_diff(bs.fields.back(), phi) == 0.0);  // terminal condition exact

    // Linear F (F' = c) with a constant test function: scalar exponential.
    auto linear = GeneralFSelection::from_p_table(
        1, std::vector<double>{0.0, 0.6});  // p(A)=0, p(a)=0.6 -> F(w) = 0.4 w
    SelectionModel lin = SelectionModel::general_f(linear);
    ScalingParams sc;
    sc.eps = 1.0;
    sc.delta = 0.5;
    sc.u = 0.5;
    sc.s = 0.8;
    sc.R = 1.0;
    const double c_eff = sc.u * ball_volume(1, sc.R) * sc.s * 0.4;
    PdeSolution f2 = solve_centering(Field(g, 0.5), sc, lin, 1.0);
    SolverOptions fine;
    fine.dt = 1e-4;
    BackwardSolution b2 =
        solve_backward_testfn(Field(g, 1.0), f2, sc, lin, 1.0, OperatorLevel::discrete, fine);
    for (std::size_t k = 0; k < b2.s_times.size(); ++k) {
        double expect = std::exp(-c_eff * (1.0 - b2.s_times[k]));
        for (double x : b2.fields[k].v) CHECK(std::abs(x - expect) < 1e-3);
    }
}

TEST_CASE("backward/forward adjointness of the linearized drift") {
    TorusGrid g(1, 256, 8.0);
    ScalingParams sc;
    sc.eps = 1.0;
    sc.delta = 0.25;
    sc.u = 0.5;
    sc.s = 0.7;
    sc.R = 1.0;
    SelectionModel genic = SelectionModel::genic();
    RngStream rng(31, 2);
    Field z(g), phi(g), f(g);
    for (std::size_t i = 0; i < z.size(); ++i) {
        z.v[i] = 2.0 * rng.next_u01() - 1.0;
        phi.v[i] = 2.0 * rng.next_u01() - 1.0;
        f.v[i] = rng.next_u01();
    }
    Field az = linearized_drift(z, f, sc, genic, OperatorLevel::discrete);
    Field aphi = linearized_drift(phi, f, sc, genic, OperatorLevel::discrete);
    double lhs = pair_fields(az, phi);
    double rhs = pair_fields(z, aphi);
    CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(lhs)));
}

TEST_CASE("backward test functions converge to the continuum solution in r_N^2") {
    TorusGrid g(1, 1024, 8.0);
    SelectionModel genic = SelectionModel::genic();
    Field phi = gaussian_bump(g, 0.7);
    const double T = 0.4;

    std::vector<double> errs;
    for (double delta : {0.4, 0.2}) {
        ScalingParams sc;
        sc.eps = 1.0;
        sc.delta = delta;
        sc.u = 0.5;
        sc.s = 0.5;
        sc.R = 1.0;
        Field w0 = gaussian_bump(g, 1.5);
        for (double& x : w0.v) x = 0.2 + 0.6 * x;
        PdeSolution fN = solve_centering(w0, sc, genic, T);
        PdeSolution fl = solve_limit_pde(w0, sc, genic, T);
        BackwardSolution bn =
            solve_backward_testfn(phi, fN, sc, genic, T, OperatorLevel::discrete);
        BackwardSolution bc =
            solve_backward_testfn(phi, fl, sc, genic, T, OperatorLevel::continuum);
        double worst = 0.0;
        for (double s : {0.0, 0.1, 0.2, 0.3})
            worst = std::max(worst, sup_diff(bn.at_time(s), bc.at_time(s)));
        errs.push_back(worst);
    }
    double order = std::log2(errs[0] / errs[1]);
    CHECK(order > 1.5);
    CHECK(order < 2.5);
}

TEST_CASE("ball-walk semigroup: identity, constants, mass, semigroup law") {
    TorusGrid g(1, 512, 16.0);
    Field phi = gaussian_bump(g, 0.6);
    Field at0 = ball_walk_semigroup(phi, 0.5, 0.0);
    CHECK(at0.v == phi.v);

    Field c(g, 0.25);
    Field ct = ball_walk_semigroup(c, 0.5, 2.0);
    for (double x : ct.v) CHECK(std::abs(x - 0.25) < 1e-10);

    Field one(g, 1.0);
    Field moved = ball_walk_semigroup(phi, 0.5, 3.0);
    CHECK(std::abs(pair_fields(moved, one) - pair_fields(phi, one)) < 1e-10);

    Field two_step = ball_walk_semigroup(ball_walk_semigroup(phi, 0.5, 1.25), 0.5, 0.75);
    Field direct = ball_walk_semigroup(phi, 0.5, 2.0);
    CHECK(sup_diff(two_step, direct) < 1e-8);
}

TEST_CASE("semigroup spread profile decays like the heat kernel") {
    TorusGrid g(1, 3200, 200.0);
    Field phi(g);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        double x = g.torus_delta(g.cell_center(i)[0], 100.0);
        phi.v[i] = std::abs(x) < 2.0 ? std::cos(0.25 * 3.14159265358979 * x) *
                                           std::cos(0.25 * 3.14159265358979 * x)
                                     : 0.0;
    }
    double l2 = phi.norm_l2();
    double f0 = semigroup_l2_profile(phi, 0.0);
    Field avg = ball_average(phi, 1.0);
    CHECK(f0 == doctest::Approx(avg.norm_l2() * avg.norm_l2()).epsilon(1e-12));

    double l1 = phi.norm_l1();
    for (double t : {20.0, 50.0, 100.0}) {
        double ft = semigroup_l2_profile(phi, t);
        CHECK(ft <= l2 * l2 + 1e-12);
        double ratio = ft * std::sqrt(4.0 * 3.14159265358979 * t) / (l1 * l1);
        CHECK(ratio > 0.9);
        CHECK(ratio < 1.1);
    }
}

TEST_CASE("forward solver flags genuine instability") {
    TorusGrid g(1, 128, 8.0);
    ScalingParams sc;
    sc.eps = 1.0;
    sc.delta = 0.5;
    sc.u = 0.5;
    sc.s = 0.5;
    sc.R = 1.0;
    SolverOptions opts;
    opts.dt = 50.0;  // far beyond the stability bound
    CHECK_THROWS(solve_centering(gaussian_bump(g, 1.0), sc, SelectionModel::genic(), 100.0, opts));
}
