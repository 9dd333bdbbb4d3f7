#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "slfv/grid.hpp"
#include "slfv/model.hpp"
#include "slfv/rng.hpp"

namespace slfv {

enum class EventKind : std::uint8_t {
    neutral = 0,
    selective_1 = 1,  // haploid selective events use this slot
    selective_2 = 2,
    mutation_1 = 3,
    mutation_2 = 4,
};

struct ReproductionEvent {
    double t = 0.0;
    std::array<double, 3> x{};  // continuous center, first d coordinates
    double r = 0.0;
    EventKind kind = EventKind::neutral;
};

// Uniform draws for one event either come from the stream (optionally
// recorded) or are replayed verbatim from a log. Consumption order inside
// apply_event is fixed, so a recorded event replays bit-for-bit.
class UniformSource {
  public:
    explicit UniformSource(RngStream& rng, std::vector<double>* record = nullptr)
        : rng_(&rng), record_(record) {}
    explicit UniformSource(std::span<const double> replay) : replay_(replay) {}

    double next();
    std::size_t replay_cursor() const { return replay_pos_; }

  private:
    RngStream* rng_ = nullptr;
    std::vector<double>* record_ = nullptr;
    std::span<const double> replay_;
    std::size_t replay_pos_ = 0;
};

// Poisson rate of reproduction events on the whole torus: L^d times the
// total mass of the radius measure.
double total_event_rate(const EventLaw& law, const TorusGrid& grid);

// Fixed law returns R; the stable law inverts the truncated Pareto CDF.
double sample_radius(const RadiusLaw& law, int d, RngStream& rng);

// Applies one reproduction event in place. All cells whose centers lie
// within r of the (continuous) center move a fraction u toward the
// offspring type; values stay in [0,1]. Throws if the ball covers no cell.
void apply_event(Field& q, const ReproductionEvent& ev, double u, const SelectionModel& model,
                 UniformSource& us);

struct Observer {
    std::string name;
    std::function<double(double, const Field&)> fn;
};

struct TrajectoryOptions {
    double horizon = 1.0;
    std::vector<double> sample_times;  // sorted, within [0, horizon]
    bool keep_event_log = false;
    bool keep_sample_fields = false;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    double max_events = 2e10;  // configuration bound; exceeding it is an error
    // Called with every dwell interval during which the field was constant
    // (before each event and once at the horizon). Lets callers accumulate
    // time integrals of functionals of the path exactly.
    std::function<void(double dt, const Field&)> dwell_hook;
};

struct TrajectoryRecord {
    Field final_field;
    std::vector<double> sample_times;
    std::vector<std::vector<double>> observations;  // [observer][sample]
    std::vector<Field> sample_fields;               // only if requested
    std::uint64_t event_count = 0;
    std::uint64_t radius_clamp_count = 0;
    double pareto_tail_fraction = 0.0;  // truncation mass reported for bias bounds
    std::vector<char> event_log;        // binary event records if requested
};

// Runs the process to the horizon: exponential event spacing at
// total_event_rate, kinds by a categorical draw, events applied in time
// order. Fully reproducible from (seed, stream) and the configuration.
TrajectoryRecord run_trajectory(const Field& q0, const EventLaw& law, const SelectionModel& model,
                                const TrajectoryOptions& opts,
                                std::span<const Observer> observers = {});

// Re-applies a recorded event stream to q0 without touching any RNG.
// The result is bitwise identical to the generating run.
TrajectoryRecord replay_trajectory(const Field& q0, const EventLaw& law,
                                   const SelectionModel& model, std::span<const char> event_log,
                                   const TrajectoryOptions& opts,
                                   std::span<const Observer> observers = {});

// Decoded view of one logged event.
struct LoggedEvent {
    ReproductionEvent ev;
    std::vector<double> uniforms;
};

// Decodes a log; throws naming the first incomplete record on truncation.
std::vector<LoggedEvent> decode_event_log(std::span<const char> log, int d);

}  // namespace slfv
