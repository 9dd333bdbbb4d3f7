#include "slfv/scaling.hpp"

#include <cmath>
#include <stdexcept>

namespace slfv {

double ScalingParams::s_N() const {
    return regime == Regime::brownian ? delta * delta * s : std::pow(delta, alpha) * s;
}

double ScalingParams::eta_N() const {
    return regime == Regime::brownian ? eps * delta * delta : eps * std::pow(delta, alpha);
}

double ScalingParams::tau_N(int d) const {
    return regime == Regime::brownian ? eps * eps * std::pow(delta, d)
                                      : eps * eps * std::pow(delta, alpha);
}

double ScalingParams::fluctuation_scale(int d) const { return std::sqrt(eta_N() / tau_N(d)); }

double ScalingParams::regime_ratio(int d) const { return tau_N(d) / eta_N(); }

double ScalingParams::regime_ratio_bound(int d) const {
    return regime == Regime::brownian ? std::pow(delta, 2 * d) : std::pow(delta, 2.0 * alpha);
}

void ScalingParams::validate(int d) const {
    if (!(eps > 0.0) || eps > 1.0 || !(delta > 0.0) || delta > 1.0)
        throw std::invalid_argument("scaling: eps and delta must lie in (0,1]");
    if (u < 0.0 || u > 1.0) throw std::invalid_argument("scaling: u must lie in [0,1]");
    if (s < 0.0 || s > 1.0) throw std::invalid_argument("scaling: s must lie in [0,1]");
    if (regime == Regime::brownian) {
        if (!(R > 0.0)) throw std::invalid_argument("scaling: R must be positive");
    } else {
        double amax = std::min(2.0, static_cast<double>(d));
        if (!(alpha > 0.0) || !(alpha < amax))
            throw std::invalid_argument("scaling: alpha must lie in (0, min(2,d))");
    }
}

RescaledView::RescaledView(const TrajectoryRecord& raw, const TorusGrid& raw_grid,
                           const ScalingParams& sc, RadiusKind law_kind)
    : raw_(&raw), raw_grid_(raw_grid), sc_(sc) {
    bool ok = (sc.regime == Regime::brownian && law_kind == RadiusKind::fixed) ||
              (sc.regime == Regime::stable && law_kind == RadiusKind::stable_pareto);
    if (!ok) throw std::invalid_argument("rescale_view: regime tag does not match the radius law");
    if (raw.sample_fields.size() != raw.sample_times.size())
        throw std::invalid_argument("rescale_view: trajectory was recorded without fields");
}

double RescaledView::time(std::size_t k) const { return raw_->sample_times[k] * sc_.eta_N(); }

double RescaledView::raw_time(double rescaled_t) const { return rescaled_t / sc_.eta_N(); }

TorusGrid RescaledView::rescaled_grid() const {
    return TorusGrid(raw_grid_.d, raw_grid_.n, raw_grid_.length * sc_.delta);
}

const Field& RescaledView::field(std::size_t k) const { return raw_->sample_fields[k]; }

}  // namespace slfv
