#include "slfv/model.hpp"

#include <cmath>
#include <stdexcept>

namespace slfv {

namespace {

int popcount(unsigned mask) {
    int c = 0;
    while (mask) {
        c += mask & 1u;
        mask >>= 1;
    }
    return c;
}

double eval_poly(const std::vector<double>& coeff, double w) {
    double acc = 0.0;
    for (std::size_t i = coeff.size(); i-- > 0;) acc = acc * w + coeff[i];
    return acc;
}

double eval_poly_derivative(const std::vector<double>& coeff, double w) {
    double acc = 0.0;
    for (std::size_t i = coeff.size(); i-- > 1;) acc = acc * w + coeff[i] * static_cast<double>(i);
    return acc;
}

}  // namespace

GeneralFSelection GeneralFSelection::from_p_table(int m, std::vector<double> p) {
    if (m < 1 || m > 16) throw std::invalid_argument("selection: m must be in [1,16]");
    if (p.size() != (std::size_t{1} << m))
        throw std::invalid_argument("selection: p table must have 2^m entries");
    for (double x : p)
        if (x < 0.0 || x > 1.0) throw std::invalid_argument("selection: p values must be in [0,1]");

    // F(w) = w - sum_mask p(mask) w^|mask| (1-w)^{m-|mask|}, expanded into
    // the power basis. Group masks by popcount, then expand (1-w)^{m-k}.
    GeneralFSelection sel;
    sel.m = m;
    sel.p = std::move(p);
    std::vector<double> by_count(m + 1, 0.0);
    for (std::size_t mask = 0; mask < sel.p.size(); ++mask)
        by_count[popcount(static_cast<unsigned>(mask))] += sel.p[mask];

    sel.f_coeff.assign(m + 1, 0.0);
    if (m >= 1) sel.f_coeff[1] += 1.0;  // the leading w
    for (int k = 0; k <= m; ++k) {
        if (by_count[k] == 0.0) continue;
        // w^k (1-w)^{m-k} = sum_j C(m-k, j) (-1)^j w^{k+j}
        double binom = 1.0;
        for (int j = 0; j <= m - k; ++j) {
            double sign = (j % 2 == 0) ? 1.0 : -1.0;
            sel.f_coeff[k + j] -= by_count[k] * sign * binom;
            binom = binom * (m - k - j) / (j + 1);
        }
    }
    return sel;
}

SelectionModel SelectionModel::genic() {
    SelectionModel model;
    model.kind_ = ModelKind::genic;
    std::vector<double> p(4, 0.0);
    p[0b11] = 1.0;
    model.hap_ = GeneralFSelection::from_p_table(2, std::move(p));
    return model;
}

SelectionModel SelectionModel::general_f(GeneralFSelection sel) {
    if (sel.f_coeff.empty()) sel = GeneralFSelection::from_p_table(sel.m, sel.p);
    SelectionModel model;
    model.kind_ = ModelKind::general_f;
    model.hap_ = std::move(sel);
    model.check_consistency();
    return model;
}

SelectionModel SelectionModel::overdominance(OverdominanceSelection sel) {
    if (!(sel.s1 > 0.0) || !(sel.s2 > 0.0))
        throw std::invalid_argument("overdominance: s1 and s2 must be positive");
    if (sel.nu1 < 0.0 || sel.nu2 < 0.0)
        throw std::invalid_argument("overdominance: mutation rates must be >= 0");
    SelectionModel model;
    model.kind_ = ModelKind::overdominance;
    model.dip_ = sel;
    return model;
}

double SelectionModel::F(double w) const {
    if (kind_ == ModelKind::overdominance) {
        double stot = dip_.s1 + dip_.s2;
        return w * (1.0 - w) * (w - dip_.s2 / stot) + dip_.nu1 / stot * w -
               dip_.nu2 / stot * (1.0 - w);
    }
    return eval_poly(hap_.f_coeff, w);
}

double SelectionModel::F_prime(double w) const {
    if (kind_ == ModelKind::overdominance) {
        double stot = dip_.s1 + dip_.s2;
        double lam0 = dip_.s2 / stot;
        // d/dw [w(1-w)(w-lam0)] = (1-2w)(w-lam0) + w(1-w)
        return (1.0 - 2.0 * w) * (w - lam0) + w * (1.0 - w) + (dip_.nu1 + dip_.nu2) / stot;
    }
    return eval_poly_derivative(hap_.f_coeff, w);
}

void SelectionModel::check_consistency() const {
    if (kind_ == ModelKind::overdominance) return;
    for (int i = 0; i <= 32; ++i) {
        double w = i / 32.0;
        double expectation = 0.0;
        for (std::size_t mask = 0; mask < hap_.p.size(); ++mask) {
            int k = popcount(static_cast<unsigned>(mask));
            expectation +=
                hap_.p[mask] * std::pow(w, k) * std::pow(1.0 - w, hap_.m - k);
        }
        if (std::abs(w - F(w) - expectation) > 1e-10)
            throw std::invalid_argument("selection: F and p disagree (w - F(w) != E[p])");
    }
}

RadiusLaw RadiusLaw::fixed(double R) {
    RadiusLaw law;
    law.kind = RadiusKind::fixed;
    law.R = R;
    return law;
}

RadiusLaw RadiusLaw::stable(double alpha, double r_max) {
    RadiusLaw law;
    law.kind = RadiusKind::stable_pareto;
    law.alpha = alpha;
    law.r_max = r_max;
    return law;
}

void RadiusLaw::validate(int d) const {
    if (kind == RadiusKind::fixed) {
        if (!(R > 0.0)) throw std::invalid_argument("radius law: R must be positive");
        return;
    }
    double amax = std::min(2.0, static_cast<double>(d));
    if (!(alpha > 0.0) || !(alpha < amax))
        throw std::invalid_argument("radius law: alpha must lie in (0, min(2,d))");
    if (!(r_max > 1.0)) throw std::invalid_argument("radius law: r_max must exceed 1");
}

double RadiusLaw::total_mass(int d) const {
    if (kind == RadiusKind::fixed) return 1.0;
    double da = d + alpha;
    return (1.0 - std::pow(r_max, -da)) / da;
}

double RadiusLaw::truncated_tail_fraction(int d) const {
    if (kind == RadiusKind::fixed) return 0.0;
    double da = d + alpha;
    double tail = std::pow(r_max, -da) / da;
    return tail / (tail + total_mass(d));
}

EventLaw EventLaw::haploid(double u, double s, RadiusLaw radius) {
    EventLaw law;
    law.u = u;
    law.sel1 = s;
    law.radius = radius;
    law.diploid = false;
    return law;
}

EventLaw EventLaw::diploid_law(double u, double s1, double s2, double nu1, double nu2,
                               RadiusLaw radius) {
    EventLaw law;
    law.u = u;
    law.sel1 = s1;
    law.sel2 = s2;
    law.mut1 = nu1;
    law.mut2 = nu2;
    law.radius = radius;
    law.diploid = true;
    return law;
}

void EventLaw::validate(int d) const {
    // u = 0 is allowed as the degenerate no-op law.
    if (u < 0.0 || u > 1.0) throw std::invalid_argument("event law: impact u must be in [0,1]");
    if (sel1 < 0.0 || sel2 < 0.0 || mut1 < 0.0 || mut2 < 0.0)
        throw std::invalid_argument("event law: kind weights must be >= 0");
    if (!(sel1 + sel2 + mut1 + mut2 < 1.0))
        throw std::invalid_argument("event law: non-neutral weights must sum below 1");
    if (!diploid && (sel2 != 0.0 || mut1 != 0.0 || mut2 != 0.0))
        throw std::invalid_argument("event law: haploid law only uses the first selection weight");
    radius.validate(d);
}

}  // namespace slfv
