#include "slfv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slfv/util.hpp"

namespace slfv {

namespace {

// Exact-measure log quadrature for integrals against r^{-(p+1)} dr: the
// measure of each interval is computed in closed form, the integrand is
// trapezoidal in the node values. Constants in the integrand are exact.
struct PowerLawQuad {
    std::vector<double> nodes;
    std::vector<double> mass;

    PowerLawQuad(double lo, double hi, double p, int nodes_per_decade) {
        if (!(lo > 0.0) || !(hi > lo)) return;
        int count = std::max(
            2, static_cast<int>(std::ceil(nodes_per_decade * std::log10(hi / lo))) + 1);
        nodes.resize(count);
        for (int i = 0; i < count; ++i)
            nodes[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
        nodes.front() = lo;
        nodes.back() = hi;
        mass.resize(count - 1);
        for (int i = 0; i + 1 < count; ++i)
            mass[i] = (std::pow(nodes[i], -p) - std::pow(nodes[i + 1], -p)) / p;
    }

    template <typename G>
    double integrate(G&& g) const {
        if (nodes.empty()) return 0.0;
        double acc = 0.0;
        double prev = g(nodes.front());
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            double next = g(nodes[i + 1]);
            acc += mass[i] * 0.5 * (prev + next);
            prev = next;
        }
        return acc;
    }
};

double default_r_cut(const TorusGrid& g, const RadialQuadOptions& opts) {
    return opts.r_cut > 0.0 ? opts.r_cut : 0.45 * g.length;
}

// Applies fn to every cell whose center lies within r of both z1 and z2.
template <typename Fn>
void for_overlap_cells(const TorusGrid& g, const BallKernel& kern, std::size_t z1, std::size_t z2,
                       Fn&& fn) {
    auto c1 = g.coords(z1);
    auto p2 = g.cell_center(z2);
    const double r2 = kern.r * kern.r;
    for (const auto& o : kern.offsets) {
        std::array<int, 3> c{c1[0] + o[0], c1[1] + o[1], c1[2] + o[2]};
        double s = 0.0;
        for (int k = 0; k < g.d; ++k) {
            double diff = g.torus_delta(g.center(c[k]), p2[k]);
            s += diff * diff;
        }
        if (s < r2) fn(g.index(c));
    }
}

// Unnormalized haploid kernel integral: h^d sum over the overlap of
// <q>(x)(1-q1)(1-q2) + (1-<q>)(x) q1 q2. Equals V_r^2 sigma^{(r)}.
double sigma_overlap_integral(const Field& q, const Field& avg_q, const BallKernel& kern,
                              std::size_t z1, std::size_t z2) {
    const TorusGrid& g = q.grid;
    const double q1 = q.v[z1], q2 = q.v[z2];
    double acc = 0.0;
    for_overlap_cells(g, kern, z1, z2, [&](std::size_t x) {
        double a = avg_q.v[x];
        acc += a * (1.0 - q1) * (1.0 - q2) + (1.0 - a) * q1 * q2;
    });
    return std::pow(g.h, g.d) * acc;
}

double rho_overlap_integral(const Field& q, const Field& avg_q, const BallKernel& kern,
                            std::size_t z1, std::size_t z2) {
    const TorusGrid& g = q.grid;
    const double q1 = q.v[z1], q2 = q.v[z2];
    double acc = 0.0;
    for_overlap_cells(g, kern, z1, z2, [&](std::size_t x) {
        double a = avg_q.v[x];
        acc += a * a * (1.0 - q1) * (1.0 - q2) +
               2.0 * a * (1.0 - a) * (0.5 - q1) * (0.5 - q2) + (1.0 - a) * (1.0 - a) * q1 * q2;
    });
    return std::pow(g.h, g.d) * acc;
}

void require_frequency_grid(const Field& q, std::size_t z1, std::size_t z2) {
    if (z1 >= q.size() || z2 >= q.size())
        throw std::invalid_argument("kernel evaluation: cell index out of range");
}

}  // namespace

double sigma_kernel(const Field& q, std::size_t z1, std::size_t z2, double r) {
    require_frequency_grid(q, z1, z2);
    if (r < 8.0 * q.grid.h)
        throw std::invalid_argument("sigma_kernel: radius below the resolution contract");
    BallKernel kern(q.grid, r);
    Field avg_q = ball_average(q, kern);
    return sigma_overlap_integral(q, avg_q, kern, z1, z2) / (kern.volume * kern.volume);
}

double rho_kernel(const Field& q, std::size_t z1, std::size_t z2, double r) {
    require_frequency_grid(q, z1, z2);
    if (r < 8.0 * q.grid.h)
        throw std::invalid_argument("rho_kernel: radius below the resolution contract");
    BallKernel kern(q.grid, r);
    Field avg_q = ball_average(q, kern);
    return rho_overlap_integral(q, avg_q, kern, z1, z2) / (kern.volume * kern.volume);
}

double sigma_stable_kernel(const Field& q, std::size_t z1, std::size_t z2, double alpha,
                           double delta, const RadialQuadOptions& opts) {
    require_frequency_grid(q, z1, z2);
    const TorusGrid& g = q.grid;
    double amax = std::min(2.0, static_cast<double>(g.d));
    if (!(alpha > 0.0) || !(alpha < amax))
        throw std::invalid_argument("sigma_stable_kernel: alpha outside (0, min(2,d))");
    if (delta < 8.0 * g.h)
        throw std::invalid_argument("sigma_stable_kernel: quadrature floor below resolution");
    auto p1 = g.cell_center(z1);
    auto p2 = g.cell_center(z2);
    double dist = g.torus_dist(std::span<const double>(p1.data(), g.d),
                               std::span<const double>(p2.data(), g.d));
    double lo = std::max(delta, 0.5 * dist);
    double hi = default_r_cut(g, opts);
    if (lo >= hi) return 0.0;
    PowerLawQuad quad(lo, hi, g.d + alpha, opts.nodes_per_decade);
    return quad.integrate([&](double r) {
        BallKernel kern(g, r);
        Field avg_q = ball_average(q, kern);
        return sigma_overlap_integral(q, avg_q, kern, z1, z2);
    });
}

double k_alpha(int d, double dist, double alpha) {
    if (!(dist > 0.0)) throw std::invalid_argument("k_alpha: coincident points");
    // The pair-coverage integral itself converges for every alpha in (0,2);
    // the tighter process-level constraint alpha < d is enforced where the
    // stable dynamics is actually run.
    if (!(alpha > 0.0) || !(alpha < 2.0))
        throw std::invalid_argument("k_alpha: alpha outside (0,2)");
    // Relative truncation keeps the quadrature exactly homogeneous in dist.
    const double lo = 0.5 * dist;
    const double rel_cut = 1e6;
    PowerLawQuad quad(lo, lo * rel_cut, d + alpha, 128);
    double head = quad.integrate([&](double r) { return ball_overlap_volume(d, r, dist); });
    double tail = ball_volume(d, 1.0) * std::pow(lo * rel_cut, -alpha) / alpha;
    return head + tail;
}

double alpha_average(const Field& f, std::size_t z1, std::size_t z2, double alpha,
                     const RadialQuadOptions& opts) {
    require_frequency_grid(f, z1, z2);
    const TorusGrid& g = f.grid;
    auto p1 = g.cell_center(z1);
    auto p2 = g.cell_center(z2);
    double dist = g.torus_dist(std::span<const double>(p1.data(), g.d),
                               std::span<const double>(p2.data(), g.d));
    if (!(dist > 0.0)) throw std::invalid_argument("alpha_average: coincident points");
    double lo = std::max(0.5 * dist, 8.0 * g.h);
    double hi = default_r_cut(g, opts);
    if (lo >= hi) throw std::invalid_argument("alpha_average: no radii between dist/2 and cutoff");
    PowerLawQuad quad(lo, hi, g.d + alpha, opts.nodes_per_decade);

    double num = quad.integrate([&](double r) {
        BallKernel kern(g, r);
        Field avg_f = ball_average(f, kern);
        double acc = 0.0;
        for_overlap_cells(g, kern, z1, z2, [&](std::size_t x) { acc += avg_f.v[x]; });
        return std::pow(g.h, g.d) * acc;
    });
    double den = quad.integrate([&](double r) {
        BallKernel kern(g, r);
        double acc = 0.0;
        for_overlap_cells(g, kern, z1, z2, [&](std::size_t) { acc += 1.0; });
        return std::pow(g.h, g.d) * acc;
    });
    if (!(den > 0.0)) throw std::invalid_argument("alpha_average: empty overlap at every radius");
    return num / den;
}

namespace {

// h^d sum_x of <q>.<(1-q)phi>^2 + (1-<q>).<q phi>^2; multiplied by V^2 this
// is the phi x phi double integral of the unnormalized sigma kernel.
double sigma_pairing_terms(const Field& q, const Field& phi, const BallKernel& kern) {
    Field a = ball_average(q, kern);
    Field b(q.grid), c(q.grid);
    for (std::size_t i = 0; i < q.size(); ++i) {
        b.v[i] = (1.0 - q.v[i]) * phi.v[i];
        c.v[i] = q.v[i] * phi.v[i];
    }
    b = ball_average(b, kern);
    c = ball_average(c, kern);
    std::vector<double> terms(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
        terms[i] = a.v[i] * b.v[i] * b.v[i] + (1.0 - a.v[i]) * c.v[i] * c.v[i];
    return std::pow(q.grid.h, q.grid.d) * pairwise_sum(terms);
}

double rho_pairing_terms(const Field& q, const Field& phi, const BallKernel& kern) {
    Field a = ball_average(q, kern);
    Field b(q.grid), c(q.grid), m(q.grid);
    for (std::size_t i = 0; i < q.size(); ++i) {
        b.v[i] = (1.0 - q.v[i]) * phi.v[i];
        c.v[i] = q.v[i] * phi.v[i];
        m.v[i] = (0.5 - q.v[i]) * phi.v[i];
    }
    b = ball_average(b, kern);
    c = ball_average(c, kern);
    m = ball_average(m, kern);
    std::vector<double> terms(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        double av = a.v[i];
        terms[i] = av * av * b.v[i] * b.v[i] + 2.0 * av * (1.0 - av) * m.v[i] * m.v[i] +
                   (1.0 - av) * (1.0 - av) * c.v[i] * c.v[i];
    }
    return std::pow(q.grid.h, q.grid.d) * pairwise_sum(terms);
}

void check_pairing_grids(const Field& q, const Field& phi) {
    if (!(q.grid == phi.grid)) throw std::invalid_argument("kernel pairing: grid mismatch");
}

}  // namespace

double sigma_pairing(const Field& q, const Field& phi, double r) {
    check_pairing_grids(q, phi);
    BallKernel kern(q.grid, r);
    return sigma_pairing_terms(q, phi, kern);
}

double rho_pairing(const Field& q, const Field& phi, double r) {
    check_pairing_grids(q, phi);
    BallKernel kern(q.grid, r);
    return rho_pairing_terms(q, phi, kern);
}

double sigma_stable_pairing(const Field& q, const Field& phi, double alpha, double delta,
                            const RadialQuadOptions& opts) {
    check_pairing_grids(q, phi);
    const TorusGrid& g = q.grid;
    if (delta < 8.0 * g.h)
        throw std::invalid_argument("sigma_stable_pairing: quadrature floor below resolution");
    double hi = default_r_cut(g, opts);
    if (delta >= hi) return 0.0;
    PowerLawQuad quad(delta, hi, g.d + alpha, opts.nodes_per_decade);
    return quad.integrate([&](double r) {
        BallKernel kern(g, r);
        return kern.volume * kern.volume * sigma_pairing_terms(q, phi, kern);
    });
}

double stable_limit_noise_pairing(const Field& f, const Field& phi, double alpha, double delta0,
                                  const RadialQuadOptions& opts) {
    check_pairing_grids(f, phi);
    const TorusGrid& g = f.grid;
    if (delta0 < 8.0 * g.h)
        throw std::invalid_argument("stable_limit_noise_pairing: floor below resolution");
    double hi = default_r_cut(g, opts);
    if (delta0 >= hi) return 0.0;
    PowerLawQuad quad(delta0, hi, g.d + alpha, opts.nodes_per_decade);
    // K_alpha([f](1 - f(z1) - f(z2)) + f f) paired with phi x phi reduces to
    // a single x-integral of ball averages per radius.
    return quad.integrate([&](double r) {
        BallKernel kern(g, r);
        Field af = ball_average(f, kern);
        Field ap = ball_average(phi, kern);
        Field fp(g);
        for (std::size_t i = 0; i < f.size(); ++i) fp.v[i] = f.v[i] * phi.v[i];
        fp = ball_average(fp, kern);
        std::vector<double> terms(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            terms[i] = af.v[i] * ap.v[i] * (ap.v[i] - 2.0 * fp.v[i]) + fp.v[i] * fp.v[i];
        }
        double x_int = std::pow(g.h, g.d) * pairwise_sum(terms);
        return kern.volume * kern.volume * x_int;
    });
}

FluctuationField extract_fluctuations(const std::vector<double>& times,
                                      const std::vector<Field>& rescaled_fields,
                                      const PdeSolution& centering, const ScalingParams& sc) {
    if (times.size() != rescaled_fields.size())
        throw std::invalid_argument("extract_fluctuations: time/field count mismatch");
    if (centering.fields.empty())
        throw std::invalid_argument("extract_fluctuations: empty centering solution");
    const TorusGrid& g = centering.fields.front().grid;
    const double t_end = centering.times.back();

    FluctuationField out;
    out.times = times;
    const int d = g.d;
    out.normalization = sc.regime == Regime::brownian
                            ? 1.0 / std::sqrt(sc.eps * std::pow(sc.delta, d - 2))
                            : 1.0 / std::sqrt(sc.eps);
    out.z.reserve(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(rescaled_fields[k].grid == g))
            throw std::invalid_argument("extract_fluctuations: grid mismatch");
        if (times[k] < -1e-12 || times[k] > t_end * (1.0 + 1e-9) + 1e-12)
            throw std::invalid_argument("extract_fluctuations: sample time outside the solution");
        Field fz = centering.at_time(times[k]);
        Field z(g);
        for (std::size_t i = 0; i < z.size(); ++i)
            z.v[i] = out.normalization * (rescaled_fields[k].v[i] - fz.v[i]);
        out.z.push_back(std::move(z));
    }
    return out;
}

double spde_variance_oracle(const Field& phi, const PdeSolution& f_sol, const ScalingParams& sc,
                            const SelectionModel& model, double t,
                            const VarianceOracleOptions& opts) {
    if (f_sol.fields.empty())
        throw std::invalid_argument("spde_variance_oracle: missing backward input solution");
    const TorusGrid& g = phi.grid;
    sc.validate(g.d);
    BackwardSolution back =
        solve_backward_testfn(phi, f_sol, sc, model, t, opts.backward_level, opts.solver);

    const int nodes = std::max(3, opts.time_nodes);
    const double ds = t / (nodes - 1);
    std::vector<double> integrand(nodes);
    for (int k = 0; k < nodes; ++k) {
        double s = k * ds;
        Field phis = back.at_time(s);
        Field fs = f_sol.at_time(s);
        double n_s = 0.0;
        if (sc.regime == Regime::brownian) {
            const double uVR = sc.u * ball_volume(g.d, sc.R);
            if (opts.noise == NoiseModel::white) {
                std::vector<double> terms(fs.size());
                for (std::size_t i = 0; i < fs.size(); ++i)
                    terms[i] = phis.v[i] * phis.v[i] * fs.v[i] * (1.0 - fs.v[i]);
                n_s = uVR * uVR * std::pow(g.h, g.d) * pairwise_sum(terms);
            } else {
                // The noise functional is u^2 V_R^2 times the sigma pairing
                // at the rescaled radius r_N; the discrete-consistent V_R is
                // the r_N stencil volume pulled back by delta^d.
                BallKernel kern(g, sc.r_N());
                double v_base = kern.volume / std::pow(sc.delta, g.d);
                n_s = sc.u * sc.u * v_base * v_base * sigma_pairing_terms(fs, phis, kern);
            }
        } else {
            if (opts.noise == NoiseModel::white) {
                n_s = sc.u * sc.u *
                      stable_limit_noise_pairing(fs, phis, sc.alpha, 8.0 * g.h, opts.solver.radial);
            } else {
                n_s = sc.u * sc.u *
                      sigma_stable_pairing(fs, phis, sc.alpha, sc.delta, opts.solver.radial);
            }
        }
        integrand[k] = n_s;
    }
    double acc = 0.0;
    for (int k = 0; k + 1 < nodes; ++k) acc += 0.5 * (integrand[k] + integrand[k + 1]) * ds;
    return acc;
}

namespace {

struct DiploidMoments {
    double drift;  // E[target] - w
    double m2;     // E[(target - w)^2]
};

// Exact enumeration of the four sampled parental alleles and the pair
// selection rule, on a constant field w.
DiploidMoments diploid_event_moments(EventKind kind, double w) {
    if (kind == EventKind::neutral) {
        return {0.0, 0.5 * w * (1.0 - w)};
    }
    if (kind == EventKind::mutation_1) return {-w, w * w};
    if (kind == EventKind::mutation_2) return {1.0 - w, (1.0 - w) * (1.0 - w)};
    const int bad = kind == EventKind::selective_1 ? 1 : 0;
    double drift = 0.0, m2 = 0.0;
    for (int mask = 0; mask < 16; ++mask) {
        int b[4];
        double prob = 1.0;
        for (int i = 0; i < 4; ++i) {
            b[i] = (mask >> i) & 1;
            prob *= b[i] ? w : (1.0 - w);
        }
        double t1 = 0.5 * (b[0] + b[1]);
        double t2 = 0.5 * (b[2] + b[3]);
        bool bad1 = b[0] == bad && b[1] == bad;
        bool bad2 = b[2] == bad && b[3] == bad;
        double ex, ex2;
        if (bad1 == bad2) {
            ex = 0.5 * (t1 + t2);
            ex2 = 0.5 * ((t1 - w) * (t1 - w) + (t2 - w) * (t2 - w));
        } else {
            double tt = bad1 ? t2 : t1;
            ex = tt;
            ex2 = (tt - w) * (tt - w);
        }
        drift += prob * (ex - w);
        m2 += prob * ex2;
    }
    return {drift, m2};
}

double haploid_selective_drift(const SelectionModel& model, double w) {
    // E[kappa] = w - F(w) for the mechanistic p-sampler.
    return -model.F(w);
}

double haploid_selective_m2(const SelectionModel& model, double w) {
    double ka = w - model.F(w);  // P(offspring = a)
    return ka * (1.0 - 2.0 * w) + w * w;
}

double mean_ball_volume(const RadiusLaw& law, int d) {
    if (law.kind == RadiusKind::fixed) return ball_volume(d, law.R);
    // int_1^{r_max} V_1 r^d r^{-(d+alpha+1)} dr / mu_total
    double v1 = ball_volume(d, 1.0);
    double integral = v1 * (1.0 - std::pow(law.r_max, -law.alpha)) / law.alpha;
    return integral / law.total_mass(d);
}

}  // namespace

double one_event_drift_oracle(const EventLaw& law, const SelectionModel& model, double w,
                              const Field& phi, const TorusGrid& grid) {
    law.validate(grid.d);
    double kind_mix = 0.0;
    if (!law.diploid) {
        kind_mix = law.sel1 * haploid_selective_drift(model, w);
    } else {
        kind_mix += law.sel1 * diploid_event_moments(EventKind::selective_1, w).drift;
        kind_mix += law.sel2 * diploid_event_moments(EventKind::selective_2, w).drift;
        kind_mix += law.mut1 * (-w);
        kind_mix += law.mut2 * (1.0 - w);
    }
    double phi_mass = std::pow(grid.h, grid.d) * pairwise_sum(phi.v);
    double vol = mean_ball_volume(law.radius, grid.d);
    return law.u * kind_mix * vol * phi_mass / std::pow(grid.length, grid.d);
}

double one_event_qv_oracle(const EventLaw& law, const SelectionModel& model, double w,
                           const Field& phi, const TorusGrid& grid, int radial_nodes_per_decade) {
    law.validate(grid.d);
    // Second moment of (kappa - w) under the kind mixture.
    double m2 = 0.0;
    if (!law.diploid) {
        m2 = law.neutral_weight() * w * (1.0 - w) + law.sel1 * haploid_selective_m2(model, w);
    } else {
        m2 += law.neutral_weight() * diploid_event_moments(EventKind::neutral, w).m2;
        m2 += law.sel1 * diploid_event_moments(EventKind::selective_1, w).m2;
        m2 += law.sel2 * diploid_event_moments(EventKind::selective_2, w).m2;
        m2 += law.mut1 * diploid_event_moments(EventKind::mutation_1, w).m2;
        m2 += law.mut2 * diploid_event_moments(EventKind::mutation_2, w).m2;
    }

    // E_x[(h^d sum_{z in ball} phi)^2] = sum over cell pairs of the
    // continuum overlap volume, then average over the radius law.
    auto phi_overlap_sum = [&](double r) {
        const TorusGrid& g = grid;
        double hd = std::pow(g.h, g.d);
        int reach = static_cast<int>(std::ceil(2.0 * r / g.h)) + 1;
        double acc = 0.0;
        if (g.d == 1) {
            for (int i = 0; i < g.n; ++i) {
                for (int off = -reach; off <= reach; ++off) {
                    double dist = std::abs(g.torus_delta(g.center(i + off), g.center(i)));
                    if (dist >= 2.0 * r) continue;
                    acc += phi.v[i] * phi.v[g.wrap(i + off)] * ball_overlap_volume(g.d, r, dist);
                }
            }
        } else {
            for (std::size_t z1 = 0; z1 < phi.size(); ++z1) {
                auto p1 = g.cell_center(z1);
                auto c1 = g.coords(z1);
                const int jlo = g.d >= 2 ? -reach : 0, jhi = g.d >= 2 ? reach : 0;
                const int klo = g.d >= 3 ? -reach : 0, khi = g.d >= 3 ? reach : 0;
                for (int i = -reach; i <= reach; ++i)
                    for (int j = jlo; j <= jhi; ++j)
                        for (int k = klo; k <= khi; ++k) {
                            std::array<int, 3> c2{c1[0] + i, c1[1] + j, c1[2] + k};
                            std::size_t z2 = g.index(c2);
                            auto p2 = g.cell_center(z2);
                            double dist = g.torus_dist(std::span<const double>(p1.data(), g.d),
                                                       std::span<const double>(p2.data(), g.d));
                            if (dist >= 2.0 * r) continue;
                            acc += phi.v[z1] * phi.v[z2] * ball_overlap_volume(g.d, r, dist);
                        }
            }
        }
        return hd * hd * acc;
    };

    double overlap_avg;
    if (law.radius.kind == RadiusKind::fixed) {
        overlap_avg = phi_overlap_sum(law.radius.R);
    } else {
        PowerLawQuad quad(1.0, law.radius.r_max, grid.d + law.radius.alpha,
                          radial_nodes_per_decade);
        overlap_avg = quad.integrate(phi_overlap_sum) / law.radius.total_mass(grid.d);
    }
    return law.u * law.u * m2 * overlap_avg / std::pow(grid.length, grid.d);
}

MartingaleEstimate martingale_residual_check(const ResidualCheckConfig& cfg) {
    if (cfg.replicates < 100)
        throw std::invalid_argument("martingale_residual_check: need at least 100 replicates");
    if (cfg.law.radius.kind != RadiusKind::fixed)
        throw std::invalid_argument(
            "martingale_residual_check: windowed check supports fixed-radius laws; use the "
            "one-event oracles for stable laws");
    const TorusGrid& g = cfg.q0.grid;
    cfg.law.validate(g.d);
    const double R = cfg.law.radius.R;
    BallKernel kern(g, R);
    const double vol_cont = ball_volume(g.d, R);
    Field ddavg_phi = double_ball_average(cfg.phi, kern);
    Field avg_phi = ball_average(cfg.phi, kern);
    Field diff_phi(g);
    for (std::size_t i = 0; i < diff_phi.size(); ++i)
        diff_phi.v[i] = ddavg_phi.v[i] - cfg.phi.v[i];

    // Selection weight multiplying F in the compensator.
    const double s_w = cfg.law.diploid ? cfg.law.sel1 + cfg.law.sel2 : cfg.law.sel1;

    auto drift_rate = [&](const Field& q) {
        double migration = pair_fields(q, diff_phi);
        Field fq = ball_average(q, kern);
        for (double& x : fq.v) x = cfg.model.F(x);
        double selection = pair_fields(fq, avg_phi);
        return cfg.law.u * vol_cont * (migration - s_w * selection);
    };

    const double base0 = pair_fields(cfg.q0, cfg.phi);
    std::vector<double> increments(cfg.replicates);

    auto run_one = [&](std::size_t rep) {
        double compensator = 0.0;
        TrajectoryOptions opts;
        opts.horizon = cfg.window;
        opts.seed = cfg.seed;
        opts.stream = rep;
        opts.dwell_hook = [&](double dt, const Field& q) { compensator += dt * drift_rate(q); };
        TrajectoryRecord rec = run_trajectory(cfg.q0, cfg.law, cfg.model, opts);
        increments[rep] = pair_fields(rec.final_field, cfg.phi) - base0 - compensator;
    };

    parallel_for_indexed(cfg.replicates, cfg.threads, run_one);

    MeanVar mv = mean_var(increments);
    MartingaleEstimate est;
    est.statistic = "compensated-increment";
    est.window = cfg.window;
    est.replicates = cfg.replicates;
    est.drift_estimate = mv.mean;
    est.drift_se = mv.se_mean();
    est.drift_z = est.drift_se > 0.0 ? mv.mean / est.drift_se : 0.0;
    est.qv_estimate = mv.var;
    est.qv_se = mv.se_var();
    double pairing = cfg.law.diploid ? rho_pairing_terms(cfg.q0, cfg.phi, kern)
                                     : sigma_pairing_terms(cfg.q0, cfg.phi, kern);
    est.qv_oracle =
        cfg.window * cfg.law.u * cfg.law.u * kern.volume * kern.volume * pairing;
    est.qv_z = est.qv_se > 0.0 ? (est.qv_estimate - est.qv_oracle) / est.qv_se : 0.0;
    est.eta_N = cfg.normalization.eta_N();
    est.tau_N = cfg.normalization.tau_N(g.d);
    return est;
}

}  // namespace slfv
