#include "slfv/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slfv/util.hpp"

namespace slfv {

namespace {

void require_resolution(const TorusGrid& g, double r, const char* who) {
    if (r < 8.0 * g.h)
        throw std::invalid_argument(std::string(who) + ": radius below the resolution contract r >= 8h");
}

double max_abs_f_prime(const SelectionModel& model) {
    double m = 0.0;
    for (int i = 0; i <= 64; ++i) m = std::max(m, std::abs(model.F_prime(i / 64.0)));
    return m;
}

// Log-spaced radii with the r^{-(alpha+1)} measure integrated exactly on
// each interval. The integrand is sampled at the nodes and averaged per
// interval, so constants are handled without quadrature error.
struct RadialQuad {
    std::vector<double> nodes;
    std::vector<double> interval_mass;  // mass of r^{-(alpha+1)} dr per interval
    double r_cut = 0.0;
    double tail_mass = 0.0;  // integral of r^{-(alpha+1)} beyond r_cut

    RadialQuad(const TorusGrid& g, double alpha, double delta, const RadialQuadOptions& opts,
               const char* who) {
        require_resolution(g, delta, who);
        r_cut = opts.r_cut > 0.0 ? opts.r_cut : 0.45 * g.length;
        if (2.0 * r_cut >= g.length)
            throw std::invalid_argument(std::string(who) + ": radial cutoff reaches across the torus");
        if (!(delta < r_cut))
            return;  // empty integration range: only the tail survives (or nothing)
        int decades_nodes = static_cast<int>(
            std::ceil(opts.nodes_per_decade * std::log10(r_cut / delta)));
        int count = std::max(2, decades_nodes + 1);
        nodes.resize(count);
        double ratio = r_cut / delta;
        for (int i = 0; i < count; ++i)
            nodes[i] = delta * std::pow(ratio, static_cast<double>(i) / (count - 1));
        nodes.front() = delta;
        nodes.back() = r_cut;
        interval_mass.resize(count - 1);
        for (int i = 0; i + 1 < count; ++i)
            interval_mass[i] =
                (std::pow(nodes[i], -alpha) - std::pow(nodes[i + 1], -alpha)) / alpha;
        tail_mass = std::pow(r_cut, -alpha) / alpha;
    }
};

Field laplacian_fd(const Field& f) {
    const TorusGrid& g = f.grid;
    Field out(g);
    const double inv_h2 = 1.0 / (g.h * g.h);
    const int n = g.n;
    if (g.d == 1) {
        for (int i = 0; i < n; ++i) {
            double c = f.v[i];
            out.v[i] = (f.v[g.wrap(i - 1)] - 2.0 * c + f.v[g.wrap(i + 1)]) * inv_h2;
        }
        return out;
    }
    if (g.d == 2) {
        for (int i = 0; i < n; ++i) {
            int im = g.wrap(i - 1), ip = g.wrap(i + 1);
            for (int j = 0; j < n; ++j) {
                int jm = g.wrap(j - 1), jp = g.wrap(j + 1);
                std::size_t si = static_cast<std::size_t>(i) * n;
                double c = f.v[si + j];
                out.v[si + j] = (f.v[static_cast<std::size_t>(im) * n + j] +
                                 f.v[static_cast<std::size_t>(ip) * n + j] + f.v[si + jm] +
                                 f.v[si + jp] - 4.0 * c) *
                                inv_h2;
            }
        }
        return out;
    }
    for (int i = 0; i < n; ++i) {
        int im = g.wrap(i - 1), ip = g.wrap(i + 1);
        for (int j = 0; j < n; ++j) {
            int jm = g.wrap(j - 1), jp = g.wrap(j + 1);
            for (int k = 0; k < n; ++k) {
                int km = g.wrap(k - 1), kp = g.wrap(k + 1);
                auto at = [&](int a, int b, int c2) {
                    return f.v[(static_cast<std::size_t>(a) * n + b) * n + c2];
                };
                out.v[(static_cast<std::size_t>(i) * n + j) * n + k] =
                    (at(im, j, k) + at(ip, j, k) + at(i, jm, k) + at(i, jp, k) + at(i, j, km) +
                     at(i, j, kp) - 6.0 * at(i, j, k)) *
                    inv_h2;
            }
        }
    }
    return out;
}

using Rhs = std::function<Field(const Field&, double)>;

PdeSolution integrate_forward(const Field& w0, double T, double dt_bound, int snapshots,
                              const Rhs& rhs, std::string scheme, double dt_override) {
    if (!(T > 0.0)) throw std::invalid_argument("pde solve: horizon must be positive");
    if (!w0.in_unit_interval())
        throw std::invalid_argument("pde solve: initial data leaves [0,1]");
    double dt_target = dt_override > 0.0 ? dt_override : dt_bound;
    long steps = std::max(1L, static_cast<long>(std::ceil(T / dt_target)));
    double dt = T / static_cast<double>(steps);
    long stride = std::max(1L, steps / std::max(1, snapshots - 1));

    PdeSolution sol;
    sol.dt = dt;
    sol.scheme = std::move(scheme);
    Field f = w0;
    sol.times.push_back(0.0);
    sol.fields.push_back(f);
    for (long k = 0; k < steps; ++k) {
        Field df = rhs(f, k * dt);
        for (std::size_t i = 0; i < f.size(); ++i) {
            double x = f.v[i] + dt * df.v[i];
            if (x < 0.0) {
                if (x < -1e-12)
                    throw std::runtime_error("pde solve: instability (value " + format17(x) + ")");
                x = 0.0;
            } else if (x > 1.0) {
                if (x > 1.0 + 1e-12)
                    throw std::runtime_error("pde solve: instability (value " + format17(x) + ")");
                x = 1.0;
            }
            f.v[i] = x;
        }
        if ((k + 1) % stride == 0 || k + 1 == steps) {
            sol.times.push_back((k + 1) * dt);
            sol.fields.push_back(f);
        }
    }
    return sol;
}

Field interpolate_slices(const std::vector<double>& times, const std::vector<Field>& fields,
                         double t) {
    if (times.empty()) throw std::invalid_argument("solution: empty time grid");
    if (t <= times.front()) return fields.front();
    if (t >= times.back()) return fields.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    std::size_t lo = hi - 1;
    double w = (t - times[lo]) / (times[hi] - times[lo]);
    Field out = fields[lo];
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = (1.0 - w) * fields[lo].v[i] + w * fields[hi].v[i];
    return out;
}

}  // namespace

Field ball_laplacian(const Field& phi, double r) {
    require_resolution(phi.grid, r, "ball_laplacian");
    const int d = phi.grid.d;
    BallKernel k(phi.grid, r);
    Field out = double_ball_average(phi, k);
    const double c = (d + 2) / (2.0 * r * r);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = c * (out.v[i] - phi.v[i]);
    return out;
}

Field fractional_laplacian(const Field& phi, double alpha, double delta,
                           const RadialQuadOptions& opts, double* tail_weight) {
    const TorusGrid& g = phi.grid;
    const double v1 = ball_volume(g.d, 1.0);
    RadialQuad quad(g, alpha, delta, opts, "fractional_laplacian");

    Field out(g);
    if (!quad.nodes.empty()) {
        Field prev = double_ball_average(phi, quad.nodes.front());
        for (std::size_t i = 0; i + 1 < quad.nodes.size(); ++i) {
            Field next = double_ball_average(phi, quad.nodes[i + 1]);
            double m = v1 * quad.interval_mass[i];
            for (std::size_t c = 0; c < out.size(); ++c)
                out.v[c] += m * (0.5 * (prev.v[c] + next.v[c]) - phi.v[c]);
            prev = std::move(next);
        }
    }
    double tail = v1 * quad.tail_mass;
    if (opts.analytic_tail) {
        // Beyond the cutoff every double average is the torus mean.
        double mean = phi.cell_mean();
        for (std::size_t c = 0; c < out.size(); ++c) out.v[c] += tail * (mean - phi.v[c]);
        if (tail_weight) *tail_weight = 0.0;
    } else if (tail_weight) {
        *tail_weight = tail;
    }
    return out;
}

Field averaged_reaction(const std::function<double(double)>& H, const Field& f, double alpha,
                        double delta, const RadialQuadOptions& opts) {
    const TorusGrid& g = f.grid;
    RadialQuad quad(g, alpha, delta, opts, "averaged_reaction");
    const double dalpha = std::pow(delta, alpha);

    auto node_field = [&](double r) {
        BallKernel k(g, r);
        Field a = ball_average(f, k);
        for (double& x : a.v) x = H(x);
        return ball_average(a, k);
    };

    Field out(g);
    double used_weight = 0.0;
    if (!quad.nodes.empty()) {
        Field prev = node_field(quad.nodes.front());
        for (std::size_t i = 0; i + 1 < quad.nodes.size(); ++i) {
            Field next = node_field(quad.nodes[i + 1]);
            double w = dalpha * alpha * quad.interval_mass[i];
            used_weight += w;
            for (std::size_t c = 0; c < out.size(); ++c)
                out.v[c] += w * 0.5 * (prev.v[c] + next.v[c]);
            prev = std::move(next);
        }
    }
    // Remaining weight: radii that average the whole torus.
    double w_tail = 1.0 - used_weight;
    double tail_value = H(f.cell_mean());
    for (double& x : out.v) x += w_tail * tail_value;
    return out;
}

Field averaged_reaction_linearized(const std::function<double(double)>& G, const Field& f,
                                   const Field& phi, double alpha, double delta,
                                   const RadialQuadOptions& opts) {
    if (!(f.grid == phi.grid))
        throw std::invalid_argument("averaged_reaction_linearized: grid mismatch");
    const TorusGrid& g = f.grid;
    RadialQuad quad(g, alpha, delta, opts, "averaged_reaction_linearized");
    const double dalpha = std::pow(delta, alpha);

    auto node_field = [&](double r) {
        BallKernel k(g, r);
        Field a = ball_average(f, k);
        Field b = ball_average(phi, k);
        for (std::size_t c = 0; c < a.size(); ++c) a.v[c] = G(a.v[c]) * b.v[c];
        return ball_average(a, k);
    };

    Field out(g);
    double used_weight = 0.0;
    if (!quad.nodes.empty()) {
        Field prev = node_field(quad.nodes.front());
        for (std::size_t i = 0; i + 1 < quad.nodes.size(); ++i) {
            Field next = node_field(quad.nodes[i + 1]);
            double w = dalpha * alpha * quad.interval_mass[i];
            used_weight += w;
            for (std::size_t c = 0; c < out.size(); ++c)
                out.v[c] += w * 0.5 * (prev.v[c] + next.v[c]);
            prev = std::move(next);
        }
    }
    double w_tail = 1.0 - used_weight;
    double tail_value = G(f.cell_mean()) * phi.cell_mean();
    for (double& x : out.v) x += w_tail * tail_value;
    return out;
}

Field PdeSolution::at_time(double t) const { return interpolate_slices(times, fields, t); }

Field BackwardSolution::at_time(double s) const { return interpolate_slices(s_times, fields, s); }

PdeSolution solve_centering(const Field& w0, const ScalingParams& sc, const SelectionModel& model,
                            double T, const SolverOptions& opts) {
    const TorusGrid& g = w0.grid;
    sc.validate(g.d);
    const double fp_max = max_abs_f_prime(model);
    auto F = [&model](double w) { return model.F(w); };

    if (sc.regime == Regime::brownian) {
        const double uVR = sc.u * ball_volume(g.d, sc.R);
        const double rn = sc.r_N();
        require_resolution(g, rn, "solve_centering");
        BallKernel kern(g, rn);
        const double c_diff = uVR * sc.R * sc.R / (rn * rn);
        const double dt_spec = 0.25 * rn * rn / ((g.d + 2) * uVR);
        const double dt_safe = 0.5 / (c_diff + uVR * sc.s * fp_max + 1e-300);
        Rhs rhs = [&, c_diff, uVR](const Field& f, double) {
            Field out = double_ball_average(f, kern);
            Field reac = ball_average(f, kern);
            for (double& x : reac.v) x = F(x);
            reac = ball_average(reac, kern);
            for (std::size_t i = 0; i < out.size(); ++i)
                out.v[i] = c_diff * (out.v[i] - f.v[i]) - uVR * sc.s * reac.v[i];
            return out;
        };
        return integrate_forward(w0, T, std::min(dt_spec, dt_safe), opts.snapshots, rhs,
                                 "centering/brownian", opts.dt);
    }

    const double v1 = ball_volume(g.d, 1.0);
    const double delta = sc.delta;
    require_resolution(g, delta, "solve_centering");
    const double mu_total = v1 * std::pow(delta, -sc.alpha) / sc.alpha;
    const double dt_safe = 0.5 / (sc.u * (mu_total + (v1 * sc.s / sc.alpha) * fp_max) + 1e-300);
    Rhs rhs = [&, delta](const Field& f, double) {
        Field out = fractional_laplacian(f, sc.alpha, delta, opts.radial);
        Field reac = averaged_reaction(F, f, sc.alpha, delta, opts.radial);
        const double cr = v1 * sc.s / sc.alpha;
        for (std::size_t i = 0; i < out.size(); ++i)
            out.v[i] = sc.u * (out.v[i] - cr * reac.v[i]);
        return out;
    };
    return integrate_forward(w0, T, dt_safe, opts.snapshots, rhs, "centering/stable", opts.dt);
}

PdeSolution solve_limit_pde(const Field& w0, const ScalingParams& sc, const SelectionModel& model,
                            double T, const SolverOptions& opts) {
    const TorusGrid& g = w0.grid;
    sc.validate(g.d);
    const double fp_max = max_abs_f_prime(model);

    if (sc.regime == Regime::brownian) {
        const double uVR = sc.u * ball_volume(g.d, sc.R);
        const double nu = uVR * sc.R * sc.R / (g.d + 2);
        const double dt_spec = 0.25 * g.h * g.h * (g.d + 2) / (2.0 * g.d * uVR * sc.R * sc.R);
        const double dt_safe = 0.5 / (2.0 * g.d * nu / (g.h * g.h) + uVR * sc.s * fp_max + 1e-300);
        Rhs rhs = [&, nu, uVR](const Field& f, double) {
            Field out = laplacian_fd(f);
            for (std::size_t i = 0; i < out.size(); ++i)
                out.v[i] = nu * out.v[i] - uVR * sc.s * model.F(f.v[i]);
            return out;
        };
        return integrate_forward(w0, T, std::min(dt_spec, dt_safe), opts.snapshots, rhs,
                                 "limit/brownian", opts.dt);
    }

    const double v1 = ball_volume(g.d, 1.0);
    const double delta0 = 8.0 * g.h;  // quadrature floor standing in for delta -> 0
    const double mu_total = v1 * std::pow(delta0, -sc.alpha) / sc.alpha;
    const double dt_safe = 0.5 / (sc.u * (mu_total + (v1 * sc.s / sc.alpha) * fp_max) + 1e-300);
    Rhs rhs = [&, delta0](const Field& f, double) {
        Field out = fractional_laplacian(f, sc.alpha, delta0, opts.radial);
        const double cr = sc.u * v1 * sc.s / sc.alpha;
        for (std::size_t i = 0; i < out.size(); ++i)
            out.v[i] = sc.u * out.v[i] - cr * model.F(f.v[i]);
        return out;
    };
    return integrate_forward(w0, T, dt_safe, opts.snapshots, rhs, "limit/stable", opts.dt);
}

Field linearized_drift(const Field& z, const Field& f, const ScalingParams& sc,
                       const SelectionModel& model, OperatorLevel level,
                       const RadialQuadOptions& radial) {
    const TorusGrid& g = z.grid;
    if (!(f.grid == g)) throw std::invalid_argument("linearized_drift: grid mismatch");
    auto Fp = [&model](double w) { return model.F_prime(w); };

    if (sc.regime == Regime::brownian) {
        const double uVR = sc.u * ball_volume(g.d, sc.R);
        if (level == OperatorLevel::continuum) {
            Field out = laplacian_fd(z);
            const double nu = uVR * sc.R * sc.R / (g.d + 2);
            for (std::size_t i = 0; i < out.size(); ++i)
                out.v[i] = nu * out.v[i] - uVR * sc.s * Fp(f.v[i]) * z.v[i];
            return out;
        }
        const double rn = sc.r_N();
        BallKernel kern(g, rn);
        const double c_diff = uVR * sc.R * sc.R / (rn * rn);
        Field out = double_ball_average(z, kern);
        Field cz = ball_average(z, kern);
        Field cf = ball_average(f, kern);
        for (std::size_t i = 0; i < cz.size(); ++i) cz.v[i] *= Fp(cf.v[i]);
        cz = ball_average(cz, kern);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.v[i] = c_diff * (out.v[i] - z.v[i]) - uVR * sc.s * cz.v[i];
        return out;
    }

    const double v1 = ball_volume(g.d, 1.0);
    const double cr = v1 * sc.s / sc.alpha;
    if (level == OperatorLevel::continuum) {
        Field out = fractional_laplacian(z, sc.alpha, 8.0 * g.h, radial);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.v[i] = sc.u * (out.v[i] - cr * Fp(f.v[i]) * z.v[i]);
        return out;
    }
    Field out = fractional_laplacian(z, sc.alpha, sc.delta, radial);
    Field reac = averaged_reaction_linearized(Fp, f, z, sc.alpha, sc.delta, radial);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = sc.u * (out.v[i] - cr * reac.v[i]);
    return out;
}

BackwardSolution solve_backward_testfn(const Field& phi, const PdeSolution& f_sol,
                                       const ScalingParams& sc, const SelectionModel& model,
                                       double t, OperatorLevel level, const SolverOptions& opts) {
    const TorusGrid& g = phi.grid;
    sc.validate(g.d);
    if (!(t > 0.0)) throw std::invalid_argument("solve_backward_testfn: need t > 0");
    if (f_sol.fields.empty() || !(f_sol.fields.front().grid == g))
        throw std::invalid_argument("solve_backward_testfn: missing or mismatched centering solution");
    const double fp_max = max_abs_f_prime(model);

    double dt_bound;
    if (sc.regime == Regime::brownian) {
        const double uVR = sc.u * ball_volume(g.d, sc.R);
        if (level == OperatorLevel::discrete) {
            const double rn = sc.r_N();
            const double c_diff = uVR * sc.R * sc.R / (rn * rn);
            dt_bound = std::min(0.25 * rn * rn / ((g.d + 2) * uVR),
                                0.5 / (c_diff + uVR * sc.s * fp_max + 1e-300));
        } else {
            const double nu = uVR * sc.R * sc.R / (g.d + 2);
            dt_bound = std::min(0.25 * g.h * g.h * (g.d + 2) / (2.0 * g.d * uVR * sc.R * sc.R),
                                0.5 / (2.0 * g.d * nu / (g.h * g.h) + uVR * sc.s * fp_max + 1e-300));
        }
    } else {
        const double v1 = ball_volume(g.d, 1.0);
        const double delta = level == OperatorLevel::discrete ? sc.delta : 8.0 * g.h;
        const double mu_total = v1 * std::pow(delta, -sc.alpha) / sc.alpha;
        dt_bound = 0.5 / (sc.u * (mu_total + (v1 * sc.s / sc.alpha) * fp_max) + 1e-300);
    }
    double dt_target = opts.dt > 0.0 ? opts.dt : dt_bound;
    long steps = std::max(1L, static_cast<long>(std::ceil(t / dt_target)));
    double dt = t / static_cast<double>(steps);
    long stride = std::max(1L, steps / std::max(1, opts.snapshots - 1));

    // March s downward from the exact terminal condition phi(., t, t) = phi.
    std::vector<double> rev_times;
    std::vector<Field> rev_fields;
    Field cur = phi;
    rev_times.push_back(t);
    rev_fields.push_back(cur);
    for (long k = 0; k < steps; ++k) {
        double s = t - k * dt;
        Field f_here = f_sol.at_time(s);
        Field drift = linearized_drift(cur, f_here, sc, model, level, opts.radial);
        for (std::size_t i = 0; i < cur.size(); ++i) cur.v[i] += dt * drift.v[i];
        if ((k + 1) % stride == 0 || k + 1 == steps) {
            rev_times.push_back(t - (k + 1) * dt);
            rev_fields.push_back(cur);
        }
    }

    BackwardSolution sol;
    sol.dt = dt;
    sol.s_times.assign(rev_times.rbegin(), rev_times.rend());
    sol.fields.assign(std::make_move_iterator(rev_fields.rbegin()),
                      std::make_move_iterator(rev_fields.rend()));
    return sol;
}

Field ball_walk_semigroup(const Field& phi, double r, double t, double tail_tol) {
    if (t < 0.0) throw std::invalid_argument("ball_walk_semigroup: time must be >= 0");
    if (t == 0.0) return phi;
    const int d = phi.grid.d;
    BallKernel kern(phi.grid, r);
    const double lambda_t = (d + 2) / (2.0 * r * r) * t;

    double weight = std::exp(-lambda_t);  // atom term, never discretized
    double cumulative = weight;
    Field out = phi;
    for (double& x : out.v) x *= weight;

    Field power = phi;
    std::size_t k = 0;
    while (cumulative < 1.0 - tail_tol) {
        ++k;
        if (k > 1000000) throw std::runtime_error("ball_walk_semigroup: series failed to converge");
        power = double_ball_average(power, kern);
        weight *= lambda_t / static_cast<double>(k);
        cumulative += weight;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += weight * power.v[i];
    }
    return out;
}

double semigroup_l2_profile(const Field& phi, double t) {
    Field spread = ball_average(ball_walk_semigroup(phi, 1.0, t), 1.0);
    double l2 = spread.norm_l2();
    return l2 * l2;
}

}  // namespace slfv
