#pragma once

#include <cstdint>
#include <vector>

namespace slfv {

// Haploid frequency-dependent selection given mechanistically: m potential
// parents are sampled in the event ball and the offspring is type a with
// probability p(k_1..k_m). p is indexed by bitmask, bit i set when k_i = a.
// The drift this induces is w - F(w) = E[p(B^m_w)] on constant fields.
struct GeneralFSelection {
    int m = 2;
    std::vector<double> p;        // size 1 << m, values in [0,1]
    std::vector<double> f_coeff;  // F as a polynomial in w, low degree first

    static GeneralFSelection from_p_table(int m, std::vector<double> p);
};

// Diploid overdominance: genotype fitnesses 1-s1 : 1 : 1-s2 plus symmetric
// recurrent mutation at rates nu1 (A1 -> A2) and nu2 (A2 -> A1). Only the
// ratios enter F, so the same model describes every rescaling level.
struct OverdominanceSelection {
    double s1 = 0.0;
    double s2 = 0.0;
    double nu1 = 0.0;
    double nu2 = 0.0;
};

enum class ModelKind : std::uint8_t { genic, general_f, overdominance };

class SelectionModel {
  public:
    // Genic selection: F(w) = w(1-w), i.e. m = 2 and offspring is a only
    // when both sampled parents are a.
    static SelectionModel genic();
    static SelectionModel general_f(GeneralFSelection sel);
    static SelectionModel overdominance(OverdominanceSelection sel);

    ModelKind kind() const { return kind_; }
    bool diploid() const { return kind_ == ModelKind::overdominance; }

    double F(double w) const;
    double F_prime(double w) const;

    const GeneralFSelection& haploid() const { return hap_; }
    const OverdominanceSelection& diploid_params() const { return dip_; }

    // Verifies w - F(w) = E[p(B^m_w)] on a w-grid (haploid models only).
    void check_consistency() const;

  private:
    SelectionModel() = default;
    ModelKind kind_ = ModelKind::genic;
    GeneralFSelection hap_;
    OverdominanceSelection dip_;
};

enum class RadiusKind : std::uint8_t { fixed, stable_pareto };

// Law of the event radius: a point mass at R, or the truncated Pareto
// density r^{-(d+alpha+1)} on [1, r_max] with alpha in (0, min(2,d)).
struct RadiusLaw {
    RadiusKind kind = RadiusKind::fixed;
    double R = 1.0;
    double alpha = 0.5;
    double r_max = 4.0;

    static RadiusLaw fixed(double R);
    static RadiusLaw stable(double alpha, double r_max);

    void validate(int d) const;
    // Total mass of the radius measure.
    double total_mass(int d) const;
    // Relative mass removed by truncating the Pareto tail at r_max.
    double truncated_tail_fraction(int d) const;
    double max_radius() const { return kind == RadiusKind::fixed ? R : r_max; }
};

// Impact plus per-event kind weights. Haploid events are neutral with
// weight 1-s and selective with weight s; diploid events split into
// neutral / selective(1,2) / mutation(1,2) with the weights below.
struct EventLaw {
    double u = 0.1;
    double sel1 = 0.0;  // haploid: total selection weight s
    double sel2 = 0.0;
    double mut1 = 0.0;
    double mut2 = 0.0;
    RadiusLaw radius;
    bool diploid = false;

    static EventLaw haploid(double u, double s, RadiusLaw radius);
    static EventLaw diploid_law(double u, double s1, double s2, double nu1, double nu2,
                                RadiusLaw radius);

    double neutral_weight() const { return 1.0 - sel1 - sel2 - mut1 - mut2; }
    void validate(int d) const;
};

}  // namespace slfv
