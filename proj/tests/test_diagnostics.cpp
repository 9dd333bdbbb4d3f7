#include <doctest.h>

#include <cmath>

#include "slfv/config.hpp"
#include "slfv/diagnostics.hpp"
#include "slfv/grid.hpp"
#include "slfv/rng.hpp"
#include "slfv/util.hpp"

using namespace slfv;

namespace {

Field random_frequency_field(const TorusGrid& g, RngStream& rng, double lo = 0.0,
                             double hi = 1.0) {
    Field f(g);
    for (double& x : f.v) x = lo + (hi - lo) * rng.next_u01();
    return f;
}

Field smooth_frequency_field(const TorusGrid& g) {
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        double x = g.cell_center(i)[0];
        f.v[i] = 0.45 + 0.3 * std::cos(2.0 * 3.14159265358979 * x / g.length);
    }
    return f;
}

double simpson(double a, double b, int n, const std::function<double(double)>& f) {
    double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("sigma kernel: support, diagonal and degenerate fields") {
    TorusGrid g(1, 256, 16.0);
    const double r = 1.0;
    const double w = 0.35;
    Field q(g, w);
    BallKernel kern(g, r);

    std::size_t z = g.index({128, 0, 0});
    std::size_t far = g.index({128 + static_cast<int>(std::ceil(2.2 * r / g.h)), 0, 0});
    CHECK(sigma_kernel(q, z, far, r) == 0.0);
    CHECK(sigma_kernel(q, z, z, r) ==
          doctest::Approx(w * (1.0 - w) / kern.volume).epsilon(1e-12));

    Field zero(g, 0.0);
    CHECK(sigma_kernel(zero, z, z, r) == 0.0);
    Field one(g, 1.0);
    CHECK(rho_kernel(one, z, z, r) == 0.0);

    // Diagonal halving: rho = sigma / 2 on constant fields, exactly.
    Field half(g, 0.5);
    CHECK(rho_kernel(half, z, z, r) ==
          doctest::Approx(0.5 * sigma_kernel(half, z, z, r)).epsilon(1e-14));
    CHECK(rho_kernel(half, z, z, r) == doctest::Approx(1.0 / (8.0 * kern.volume)).epsilon(1e-12));
}

TEST_CASE("kernels are symmetric and nonnegative on random fields") {
    TorusGrid g(1, 128, 16.0);
    RngStream rng(41, 0);
    Field q = random_frequency_field(g, rng);
    const double r = 1.0;
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t z1 = static_cast<std::size_t>(rng.next_u01() * g.n);
        std::size_t z2 = static_cast<std::size_t>(rng.next_u01() * g.n);
        double s12 = sigma_kernel(q, z1, z2, r);
        double s21 = sigma_kernel(q, z2, z1, r);
        CHECK(s12 == doctest::Approx(s21).epsilon(1e-12));
        CHECK(s12 >= 0.0);
        double r12 = rho_kernel(q, z1, z2, r);
        CHECK(r12 == doctest::Approx(rho_kernel(q, z2, z1, r)).epsilon(1e-12));
        CHECK(r12 >= 0.0);
    }
}

TEST_CASE("pairing identities match the banded double sums") {
    TorusGrid g(1, 96, 12.0);
    RngStream rng(43, 1);
    Field q = random_frequency_field(g, rng);
    Field phi(g);
    for (double& x : phi.v) x = 2.0 * rng.next_u01() - 1.0;
    const double r = 1.0;
    const double hd = g.h;

    double brute_sigma = 0.0, brute_rho = 0.0;
    for (std::size_t z1 = 0; z1 < q.size(); ++z1)
        for (std::size_t z2 = 0; z2 < q.size(); ++z2) {
            double k_s = sigma_kernel(q, z1, z2, r);
            if (k_s != 0.0) brute_sigma += phi.v[z1] * phi.v[z2] * k_s * hd * hd;
            double k_r = rho_kernel(q, z1, z2, r);
            if (k_r != 0.0) brute_rho += phi.v[z1] * phi.v[z2] * k_r * hd * hd;
        }
    CHECK(sigma_pairing(q, phi, r) == doctest::Approx(brute_sigma).epsilon(1e-9));
    CHECK(rho_pairing(q, phi, r) == doctest::Approx(brute_rho).epsilon(1e-9));
}

TEST_CASE("stable kernel: null field, uniform bound and diagonal quadrature oracle") {
    TorusGrid g(1, 256, 16.0);
    const double alpha = 0.5, delta = 1.0;
    Field zero(g, 0.0);
    std::size_t z = g.index({128, 0, 0});
    CHECK(sigma_stable_kernel(zero, z, z, alpha, delta) == 0.0);

    RngStream rng(47, 0);
    Field q = random_frequency_field(g, rng);
    const double v1 = ball_volume(1, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t z1 = static_cast<std::size_t>(rng.next_u01() * g.n);
        std::size_t z2 = static_cast<std::size_t>(rng.next_u01() * g.n);
        auto p1 = g.cell_center(z1);
        auto p2 = g.cell_center(z2);
        double dist = std::abs(g.torus_delta(p1[0], p2[0]));
        double bound = v1 * std::pow(std::max(delta, 0.5 * dist), -alpha) / alpha;
        CHECK(sigma_stable_kernel(q, z1, z2, alpha, delta) <= bound * 1.1);
    }

    // Diagonal on a constant field: integrand w(1-w) V_r, truncated at r_cut.
    const double w = 0.3;
    Field c(g, w);
    double r_cut = 0.45 * g.length;
    double oracle = simpson(delta, r_cut, 4000, [&](double r) {
        return w * (1.0 - w) * ball_volume(1, r) * std::pow(r, -(1.0 + alpha + 1.0));
    });
    double got = sigma_stable_kernel(c, z, z, alpha, delta);
    CHECK(std::abs(got - oracle) / oracle < 0.05);
}

TEST_CASE("k_alpha: homogeneity, log-log slope and the quadrature constant") {
    // Exact scaling k(2s) = 2^{-alpha} k(s).
    for (double alpha : {0.5, 1.0 - 1e-9}) {
        double a = k_alpha(1, 1.0, alpha);
        double b = k_alpha(1, 2.0, alpha);
        CHECK(b == doctest::Approx(std::pow(2.0, -alpha) * a).epsilon(1e-12));
    }

    for (int d : {1, 2}) {
        for (double alpha : {0.5, d == 1 ? 0.9 : 1.0}) {
            std::vector<double> lx, ly;
            for (double dist : {0.3, 0.5, 1.0, 2.0, 3.0}) {
                lx.push_back(std::log(dist));
                ly.push_back(std::log(k_alpha(d, dist, alpha)));
            }
            double slope = ols_slope(lx, ly);
            CHECK(std::abs(slope + alpha) < 0.02);
        }
    }

    // d=1, alpha=1/2, separation 1: adaptive-style quadrature oracle of
    // (2r - 1) r^{-5/2} on [1/2, inf), plus the closed form.
    double oracle = simpson(0.5, 2000.0, 400000,
                            [](double r) { return (2.0 * r - 1.0) * std::pow(r, -2.5); });
    // Analytic tail of the same integrand beyond the quadrature window.
    oracle += 4.0 / std::sqrt(2000.0) - (2.0 / 3.0) * std::pow(2000.0, -1.5);
    double closed = std::pow(2.0, 1.5) / (0.5 * 1.5);
    CHECK(k_alpha(1, 1.0, 0.5) == doctest::Approx(oracle).epsilon(2e-3));
    CHECK(k_alpha(1, 1.0, 0.5) == doctest::Approx(closed).epsilon(1e-3));
    CHECK_THROWS(k_alpha(1, 0.0, 0.5));
}

TEST_CASE("alpha-average: constants, extremes and convexity") {
    TorusGrid g(1, 256, 16.0);
    std::size_t z1 = g.index({100, 0, 0});
    std::size_t z2 = g.index({140, 0, 0});

    Field c(g, 0.42);
    CHECK(alpha_average(c, z1, z2, 0.5) == doctest::Approx(0.42).epsilon(1e-12));
    Field zero(g, 0.0), one(g, 1.0);
    CHECK(alpha_average(zero, z1, z2, 0.5) == 0.0);
    CHECK(alpha_average(one, z1, z2, 0.5) == doctest::Approx(1.0).epsilon(1e-12));

    RngStream rng(53, 0);
    Field q = random_frequency_field(g, rng, 0.2, 0.7);
    double value = alpha_average(q, z1, z2, 0.5);
    double lo = *std::min_element(q.v.begin(), q.v.end());
    double hi = *std::max_element(q.v.begin(), q.v.end());
    CHECK(value >= lo - 1e-12);
    CHECK(value <= hi + 1e-12);
    CHECK_THROWS(alpha_average(q, z1, z1, 0.5));
}

TEST_CASE("fluctuation extraction: zero field, linearity, start at zero") {
    TorusGrid g(1, 512, 8.0);
    ScalingParams sc;
    sc.eps = 0.01;
    sc.delta = 0.2;
    sc.u = 0.5;
    sc.s = 0.5;
    sc.R = 1.0;
    SelectionModel genic = SelectionModel::genic();
    Field w0 = smooth_frequency_field(g);
    PdeSolution f_sol = solve_centering(w0, sc, genic, 1.0);

    std::vector<double> times{0.0, 0.5, 1.0};
    std::vector<Field> fields;
    for (double t : times) fields.push_back(f_sol.at_time(t));
    FluctuationField z = extract_fluctuations(times, fields, f_sol, sc);
    for (const Field& zf : z.z)
        for (double x : zf.v) CHECK(std::abs(x) < 1e-12);

    // Perturbing the trajectory by c * g scales every pairing by c.
    Field bump(g);
    bump.v[160] = 1.0;
    std::vector<Field> pert = fields;
    for (std::size_t k = 0; k < pert.size(); ++k)
        for (std::size_t i = 0; i < bump.size(); ++i) pert[k].v[i] += 0.01 * bump.v[i];
    FluctuationField z1 = extract_fluctuations(times, pert, f_sol, sc);
    for (std::size_t k = 0; k < pert.size(); ++k)
        for (std::size_t i = 0; i < bump.size(); ++i) pert[k].v[i] += 0.01 * bump.v[i];
    FluctuationField z2 = extract_fluctuations(times, pert, f_sol, sc);
    CHECK(pair_fields(z2.z[1], bump) ==
          doctest::Approx(2.0 * pair_fields(z1.z[1], bump)).epsilon(1e-9));

    CHECK(z.normalization ==
          doctest::Approx(1.0 / std::sqrt(sc.eps * std::pow(sc.delta, -1))).epsilon(1e-12));

    std::vector<double> bad_times{0.0, 2.5};
    std::vector<Field> bad_fields{fields[0], fields[1]};
    CHECK_THROWS(extract_fluctuations(bad_times, bad_fields, f_sol, sc));
}

TEST_CASE("SPDE variance oracle: degenerate fields and monotonicity") {
    TorusGrid g(1, 512, 8.0);
    ScalingParams sc;
    sc.eps = 1e-3;
    sc.delta = 0.25;
    sc.u = 0.5;
    sc.s = 0.5;
    sc.R = 1.0;
    SelectionModel genic = SelectionModel::genic();
    Field phi = make_test_bump(g, 0.5 * g.length, 0.15 * g.length);

    PdeSolution absorbed = solve_centering(Field(g, 0.0), sc, genic, 1.0);
    VarianceOracleOptions opts;
    CHECK(spde_variance_oracle(phi, absorbed, sc, genic, 1.0, opts) ==
          doctest::Approx(0.0).epsilon(1e-12));

    PdeSolution mid = solve_centering(Field(g, 0.5), sc, genic, 1.0);
    double v_half = spde_variance_oracle(phi, mid, sc, genic, 0.5, opts);
    double v_full = spde_variance_oracle(phi, mid, sc, genic, 1.0, opts);
    CHECK(v_half > 0.0);
    CHECK(v_full >= v_half);
}

TEST_CASE("SPDE variance oracle vs heat-semigroup quadrature on the toy model") {
    // F' = 0 (s = 0) and f = 1/2: Var = (u V_R)^2 (1/4) int ||G_{t-s} phi||_2^2.
    TorusGrid g(1, 512, 16.0);
    ScalingParams sc;
    sc.eps = 1e-3;
    sc.delta = 0.25;
    sc.u = 0.5;
    sc.s = 0.0;
    sc.R = 1.0;
    SelectionModel genic = SelectionModel::genic();
    Field phi = make_test_bump(g, 0.5 * g.length, 0.15 * g.length);
    const double T = 0.5;
    PdeSolution half = solve_centering(Field(g, 0.5), sc, genic, T);

    VarianceOracleOptions opts;
    opts.noise = NoiseModel::white;
    opts.backward_level = OperatorLevel::continuum;
    opts.time_nodes = 129;
    double got = spde_variance_oracle(phi, half, sc, genic, T, opts);

    // Independent oracle: periodic Gaussian convolution by direct sums.
    const double uVR = sc.u * ball_volume(1, sc.R);
    const double nu = uVR * sc.R * sc.R / 3.0;
    auto heat_l2sq = [&](double tau) {
        if (tau <= 0.0) {
            double l2 = phi.norm_l2();
            return l2 * l2;
        }
        double var = 2.0 * nu * tau;
        Field out(g);
        for (int i = 0; i < g.n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < g.n; ++j) {
                double dx = g.torus_delta(g.center(i), g.center(j));
                acc += phi.v[j] * std::exp(-dx * dx / (2.0 * var));
            }
            out.v[i] = acc * g.h / std::sqrt(2.0 * 3.14159265358979 * var);
        }
        double l2 = out.norm_l2();
        return l2 * l2;
    };
    int nodes = 65;
    double ds = T / (nodes - 1);
    double integral = 0.0;
    for (int k = 0; k < nodes; ++k) {
        double w = (k == 0 || k == nodes - 1) ? 0.5 : 1.0;
        integral += w * heat_l2sq(T - k * ds) * ds;
    }
    double expect = uVR * uVR * 0.25 * integral;
    CHECK(std::abs(got - expect) / expect < 0.01);
}

TEST_CASE("windowed martingale residuals: no-op law and genic consistency") {
    TorusGrid g(1, 256, 8.0);
    ResidualCheckConfig rc;
    rc.q0 = Field(g, 0.5);
    rc.law = EventLaw::haploid(0.0, 0.2, RadiusLaw::fixed(0.5));
    rc.model = SelectionModel::genic();
    rc.phi = make_test_bump(g, 0.5 * g.length, 0.15 * g.length);
    rc.window = 0.5;
    rc.replicates = 120;
    rc.seed = 5;
    MartingaleEstimate noop = martingale_residual_check(rc);
    CHECK(noop.drift_estimate == 0.0);
    CHECK(noop.qv_estimate == 0.0);
    CHECK(noop.drift_z == 0.0);

    rc.law = EventLaw::haploid(0.05, 0.1, RadiusLaw::fixed(0.5));
    rc.replicates = 1500;
    rc.window = 8.0;
    MartingaleEstimate est = martingale_residual_check(rc);
    CHECK(std::abs(est.drift_z) < 3.0);
    CHECK(std::abs(est.qv_estimate - est.qv_oracle) <
          3.0 * est.qv_se + 0.05 * est.qv_oracle);

    rc.replicates = 50;
    CHECK_THROWS(martingale_residual_check(rc));
}
