#pragma once

#include <cstdint>

#include "slfv/event_engine.hpp"
#include "slfv/grid.hpp"

namespace slfv {

enum class Regime : std::uint8_t { brownian, stable };

// N-indexed scaling knobs. Base parameters (u, s, R or alpha) are held
// fixed while eps and delta decrease along a sweep; everything the
// rescaled process needs is derived here.
struct ScalingParams {
    Regime regime = Regime::brownian;
    double eps = 1.0;
    double delta = 1.0;
    double u = 1.0;
    double s = 0.0;
    double R = 1.0;      // Brownian regime
    double alpha = 0.5;  // stable regime

    double u_N() const { return eps * u; }
    double s_N() const;
    double r_N() const { return delta * R; }
    // Time compression: rescaled time t reads the raw process at t / eta_N.
    double eta_N() const;
    // Noise normalization of the martingale problem.
    double tau_N(int d) const;
    // (eta_N / tau_N)^{1/2}, the fluctuation-field normalization.
    double fluctuation_scale(int d) const;

    // Ratio tau_N/eta_N against the regime condition (o(delta^{2d}) in the
    // Brownian case, o(delta^{2 alpha}) in the stable case).
    double regime_ratio(int d) const;
    double regime_ratio_bound(int d) const;

    void validate(int d) const;
};

// Lazily rescaled view of raw trajectory samples: q~_t(x) = q_{t/eta}(x/delta).
// Cells are shared between the raw and rescaled grids, so no field data is
// copied; only times and the grid labelling change.
class RescaledView {
  public:
    RescaledView(const TrajectoryRecord& raw, const TorusGrid& raw_grid, const ScalingParams& sc,
                 RadiusKind law_kind);

    std::size_t sample_count() const { return raw_->sample_times.size(); }
    // Rescaled time of sample k.
    double time(std::size_t k) const;
    // Raw time that a rescaled time t pulls back to.
    double raw_time(double rescaled_t) const;
    TorusGrid rescaled_grid() const;
    const Field& field(std::size_t k) const;

  private:
    const TrajectoryRecord* raw_;
    TorusGrid raw_grid_;
    ScalingParams sc_;
};

}  // namespace slfv
