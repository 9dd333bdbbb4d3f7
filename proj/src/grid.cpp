#include "slfv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "slfv/util.hpp"

namespace slfv {

TorusGrid::TorusGrid(int d_, int n_, double length_) : d(d_), n(n_), length(length_) {
    if (d < 1 || d > 3) throw std::invalid_argument("TorusGrid: dimension must be 1, 2 or 3");
    if (n < 4) throw std::invalid_argument("TorusGrid: need at least 4 cells per side");
    if (!(length > 0.0)) throw std::invalid_argument("TorusGrid: side length must be positive");
    h = length / n;
}

std::size_t TorusGrid::cell_count() const {
    std::size_t c = 1;
    for (int k = 0; k < d; ++k) c *= static_cast<std::size_t>(n);
    return c;
}

double TorusGrid::torus_delta(double a, double b) const {
    double diff = a - b;
    diff -= length * std::round(diff / length);
    return diff;
}

double TorusGrid::torus_dist(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
        double diff = torus_delta(a[k], b[k]);
        s += diff * diff;
    }
    return std::sqrt(s);
}

int TorusGrid::axis_cell(double x) const {
    double pos = x / length;
    pos -= std::floor(pos);
    int i = static_cast<int>(pos * n);
    return i >= n ? n - 1 : i;
}

std::size_t TorusGrid::index(const std::array<int, 3>& c) const {
    std::size_t idx = static_cast<std::size_t>(wrap(c[0]));
    for (int k = 1; k < d; ++k) idx = idx * n + static_cast<std::size_t>(wrap(c[k]));
    return idx;
}

std::array<int, 3> TorusGrid::coords(std::size_t idx) const {
    std::array<int, 3> c{0, 0, 0};
    for (int k = d - 1; k >= 0; --k) {
        c[k] = static_cast<int>(idx % n);
        idx /= n;
    }
    return c;
}

std::array<double, 3> TorusGrid::cell_center(std::size_t idx) const {
    auto c = coords(idx);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int k = 0; k < d; ++k) x[k] = center(c[k]);
    return x;
}

Field::Field(const TorusGrid& g, double fill) : grid(g), v(g.cell_count(), fill) {}

double Field::norm_l1() const {
    std::vector<double> a(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
    return std::pow(grid.h, grid.d) * pairwise_sum(a);
}

double Field::norm_l2() const {
    return std::sqrt(std::pow(grid.h, grid.d) * pairwise_dot(v, v));
}

double Field::norm_linf() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double Field::cell_mean() const { return pairwise_sum(v) / static_cast<double>(v.size()); }

bool Field::in_unit_interval(double slack) const {
    for (double x : v)
        if (x < -slack || x > 1.0 + slack) return false;
    return true;
}

double ball_volume(int d, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("ball_volume: radius must be positive");
    switch (d) {
        case 1: return 2.0 * r;
        case 2: return std::numbers::pi * r * r;
        case 3: return 4.0 / 3.0 * std::numbers::pi * r * r * r;
        default: throw std::invalid_argument("ball_volume: dimension must be 1, 2 or 3");
    }
}

double ball_overlap_volume(int d, double r, double dist) {
    if (!(r > 0.0)) throw std::invalid_argument("ball_overlap_volume: radius must be positive");
    if (dist < 0.0) throw std::invalid_argument("ball_overlap_volume: separation must be >= 0");
    if (dist >= 2.0 * r) return 0.0;
    switch (d) {
        case 1: return 2.0 * r - dist;
        case 2: {
            double q = dist / (2.0 * r);
            return 2.0 * r * r * std::acos(q) - 0.5 * dist * std::sqrt(4.0 * r * r - dist * dist);
        }
        case 3: {
            // Lens volume of two equal spheres.
            return std::numbers::pi / 12.0 * (4.0 * r + dist) * (2.0 * r - dist) * (2.0 * r - dist);
        }
        default: throw std::invalid_argument("ball_overlap_volume: dimension must be 1, 2 or 3");
    }
}

BallKernel::BallKernel(const TorusGrid& g, double radius) : d(g.d), r(radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("BallKernel: radius must be positive");
    if (2.0 * radius >= g.length)
        throw std::invalid_argument("BallKernel: ball diameter must be smaller than the torus");
    reach = static_cast<int>(std::ceil(radius / g.h));
    const double r2 = radius * radius;
    auto inside = [&](int i, int j, int k) {
        double s = (i * g.h) * (i * g.h);
        if (d >= 2) s += (j * g.h) * (j * g.h);
        if (d >= 3) s += (k * g.h) * (k * g.h);
        return s < r2;
    };
    const int jlo = d >= 2 ? -reach : 0, jhi = d >= 2 ? reach : 0;
    const int klo = d >= 3 ? -reach : 0, khi = d >= 3 ? reach : 0;
    for (int i = -reach; i <= reach; ++i)
        for (int j = jlo; j <= jhi; ++j)
            for (int k = klo; k <= khi; ++k)
                if (inside(i, j, k)) offsets.push_back({i, j, k});
    count = offsets.size();
    volume = std::pow(g.h, d) * static_cast<double>(count);
}

namespace {

// Sum f over the stencil around every cell, then divide by the member count.
Field stencil_mean(const Field& f, const BallKernel& k) {
    const TorusGrid& g = f.grid;
    Field out(g);
    const int n = g.n;
    const double inv = 1.0 / static_cast<double>(k.count);

    if (g.d == 1) {
        // Contiguous window [-reach, reach]; split the wrap once.
        const int m = k.reach;
        std::vector<double> ext(n + 2 * m);
        for (int i = 0; i < n + 2 * m; ++i) ext[i] = f.v[g.wrap(i - m)];
        // Offsets in d=1 are exactly the centers with |i h| < r.
        std::vector<int> offs;
        offs.reserve(k.count);
        for (const auto& o : k.offsets) offs.push_back(o[0]);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int o : offs) s += ext[i + m + o];
            out.v[i] = s * inv;
        }
        return out;
    }

    // Wrapped index lookup per axis, valid for |offset| <= reach.
    const int m = k.reach;
    std::vector<int> wrapped(n + 2 * m);
    for (int i = 0; i < n + 2 * m; ++i) wrapped[i] = g.wrap(i - m);

    if (g.d == 2) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (const auto& o : k.offsets) {
                    int iw = wrapped[i + m + o[0]];
                    int jw = wrapped[j + m + o[1]];
                    s += f.v[static_cast<std::size_t>(iw) * n + jw];
                }
                out.v[static_cast<std::size_t>(i) * n + j] = s * inv;
            }
        }
        return out;
    }

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int l = 0; l < n; ++l) {
                double s = 0.0;
                for (const auto& o : k.offsets) {
                    std::size_t iw = wrapped[i + m + o[0]];
                    std::size_t jw = wrapped[j + m + o[1]];
                    std::size_t lw = wrapped[l + m + o[2]];
                    s += f.v[(iw * n + jw) * n + lw];
                }
                out.v[(static_cast<std::size_t>(i) * n + j) * n + l] = s * inv;
            }
        }
    }
    return out;
}

}  // namespace

Field ball_average(const Field& f, const BallKernel& k) {
    if (k.count == 0) throw std::invalid_argument("ball_average: empty kernel");
    return stencil_mean(f, k);
}

Field ball_average(const Field& f, double r) {
    if (r < f.grid.h) throw std::invalid_argument("ball_average: radius below one cell width");
    return ball_average(f, BallKernel(f.grid, r));
}

Field double_ball_average(const Field& f, const BallKernel& k) {
    return ball_average(ball_average(f, k), k);
}

Field double_ball_average(const Field& f, double r) {
    if (r < f.grid.h) throw std::invalid_argument("double_ball_average: radius below one cell width");
    BallKernel k(f.grid, r);
    return double_ball_average(f, k);
}

double pair_fields(const Field& f, const Field& phi) {
    if (!(f.grid == phi.grid)) throw std::invalid_argument("pair_fields: grid mismatch");
    return std::pow(f.grid.h, f.grid.d) * pairwise_dot(f.v, phi.v);
}

XiMetricFamily make_xi_family(const TorusGrid& g, int n_max) {
    if (n_max < 1) throw std::invalid_argument("make_xi_family: need at least one bump");
    XiMetricFamily fam;
    fam.bumps.reserve(n_max);
    // Centers follow a golden-ratio walk so pairings probe distinct regions;
    // widths cycle through four octave-ish scales.
    const double golden[3] = {0.6180339887498949, 0.7548776662466927, 0.8191725133961645};
    const double widths[4] = {1.0 / 4.0, 1.0 / 6.0, 1.0 / 9.0, 1.0 / 13.0};
    const double pi = 3.14159265358979323846;
    for (int b = 0; b < n_max; ++b) {
        double w = widths[b % 4] * g.length;
        std::array<double, 3> c{};
        for (int k = 0; k < g.d; ++k) {
            double frac = 0.5 + (b + 1) * golden[k];
            frac -= std::floor(frac);
            c[k] = frac * g.length;
        }
        Field bump(g);
        for (std::size_t i = 0; i < bump.size(); ++i) {
            auto x = g.cell_center(i);
            double rho = g.torus_dist(std::span<const double>(x.data(), g.d),
                                      std::span<const double>(c.data(), g.d));
            if (rho < w) {
                double ccos = std::cos(pi * rho / (2.0 * w));
                bump.v[i] = ccos * ccos;
            }
        }
        double l1 = bump.norm_l1();
        if (!(l1 > 0.0)) throw std::runtime_error("make_xi_family: degenerate bump");
        for (double& x : bump.v) x /= l1;
        fam.bumps.push_back(std::move(bump));
    }
    return fam;
}

double xi_distance(const Field& f, const Field& g, const XiMetricFamily& fam) {
    if (fam.bumps.empty()) throw std::invalid_argument("xi_distance: empty family");
    if (!(f.grid == g.grid)) throw std::invalid_argument("xi_distance: grid mismatch");
    double dist = 0.0;
    double weight = 0.5;
    for (const Field& phi : fam.bumps) {
        dist += weight * std::abs(pair_fields(f, phi) - pair_fields(g, phi));
        weight *= 0.5;
    }
    return dist;
}

}  // namespace slfv
