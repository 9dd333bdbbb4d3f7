#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace slfv {

// Periodic grid on the torus [0,L)^d with n cells per side and cell
// centers at (i + 1/2) h, h = L/n. d is 1, 2 or 3.
struct TorusGrid {
    int d = 1;
    int n = 4;
    double length = 1.0;
    double h = 0.25;

    TorusGrid() = default;
    TorusGrid(int d_, int n_, double length_);

    std::size_t cell_count() const;

    int wrap(int i) const {
        i %= n;
        return i < 0 ? i + n : i;
    }
    double center(int i) const { return (i + 0.5) * h; }

    // Signed minimal-image difference a - b on the circle of length L.
    double torus_delta(double a, double b) const;
    double torus_dist(std::span<const double> a, std::span<const double> b) const;

    // Cell index along one axis for a continuous coordinate.
    int axis_cell(double x) const;

    std::size_t index(const std::array<int, 3>& c) const;
    std::array<int, 3> coords(std::size_t idx) const;
    // Center of a cell given by linear index (first d entries meaningful).
    std::array<double, 3> cell_center(std::size_t idx) const;

    bool operator==(const TorusGrid&) const = default;
};

// One real value per cell. Serves both as allele-frequency state (values
// in [0,1]) and as a grid-sampled test function.
struct Field {
    TorusGrid grid;
    std::vector<double> v;

    Field() = default;
    explicit Field(const TorusGrid& g, double fill = 0.0);

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
    std::size_t size() const { return v.size(); }

    double norm_l1() const;
    double norm_l2() const;
    double norm_linf() const;
    // Mean of v over all cells.
    double cell_mean() const;
    bool in_unit_interval(double slack = 0.0) const;
};

// Continuum volume of the d-ball of radius r.
double ball_volume(int d, double r);

// Continuum volume of B(x,r) ∩ B(y,r) at separation dist; 0 once dist >= 2r.
double ball_overlap_volume(int d, double r, double dist);

// Discrete ball stencil: relative cell offsets whose centers lie strictly
// within distance r of a cell center. Shared by the averaging operators and
// by diagnostics so that both sides of every comparison see the same ball.
struct BallKernel {
    int d = 1;
    double r = 0.0;
    int reach = 0;                            // max |offset| per axis
    std::vector<std::array<int, 3>> offsets;  // member offsets
    std::size_t count = 0;
    double volume = 0.0;  // h^d * count

    BallKernel() = default;
    BallKernel(const TorusGrid& g, double radius);
};

// Mean of the field over the ball stencil at every cell (circular
// convolution with the normalized ball indicator). Mass preserving and a
// sup-norm contraction. Requires r >= h.
Field ball_average(const Field& f, double r);
Field ball_average(const Field& f, const BallKernel& k);

Field double_ball_average(const Field& f, double r);
Field double_ball_average(const Field& f, const BallKernel& k);

// <f, phi> = h^d sum_i f_i phi_i. Throws on grid mismatch.
double pair_fields(const Field& f, const Field& phi);

// Separating family of normalized raised-cosine bumps for the vague metric.
struct XiMetricFamily {
    std::vector<Field> bumps;  // each with discrete L1 norm exactly 1
};

XiMetricFamily make_xi_family(const TorusGrid& g, int n_max = 16);

// d(f,g) = sum_n 2^{-n} |<f,phi_n> - <g,phi_n>|, truncated at the family size.
double xi_distance(const Field& f, const Field& g, const XiMetricFamily& fam);

}  // namespace slfv
