#include "slfv/event_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace slfv {

double UniformSource::next() {
    if (rng_) {
        double u = rng_->next_u01();
        if (record_) record_->push_back(u);
        return u;
    }
    if (replay_pos_ >= replay_.size())
        throw std::runtime_error("event replay: uniform stream exhausted");
    return replay_[replay_pos_++];
}

double total_event_rate(const EventLaw& law, const TorusGrid& grid) {
    return std::pow(grid.length, grid.d) * law.radius.total_mass(grid.d);
}

double sample_radius(const RadiusLaw& law, int d, RngStream& rng) {
    if (law.kind == RadiusKind::fixed) return law.R;
    double da = d + law.alpha;
    double u = rng.next_u01();
    double scale = 1.0 - std::pow(law.r_max, -da);
    return std::pow(1.0 - u * scale, -1.0 / da);
}

namespace {

// Inclusive index range of cell centers within distance rho of coordinate x
// along one axis. Valid while 2*rho < L, which the radius laws guarantee.
struct AxisRange {
    int lo, hi;  // iterate lo..hi, wrap each index
};

AxisRange axis_range(const TorusGrid& g, double x, double rho) {
    int lo = static_cast<int>(std::floor((x - rho) / g.h - 0.5)) + 1;
    int hi = static_cast<int>(std::ceil((x + rho) / g.h - 0.5)) - 1;
    if (hi - lo + 1 > g.n) hi = lo + g.n - 1;
    return {lo, hi};
}

// Cell containing a point drawn uniformly from the continuous ball B(x,r).
std::size_t sample_parent_cell(const TorusGrid& g, const std::array<double, 3>& x, double r,
                               UniformSource& us) {
    std::array<double, 3> y{};
    if (g.d == 1) {
        y[0] = x[0] + (2.0 * us.next() - 1.0) * r;
    } else {
        // Rejection from the bounding box; acceptance >= pi/6.
        while (true) {
            double s = 0.0;
            for (int k = 0; k < g.d; ++k) {
                double off = (2.0 * us.next() - 1.0) * r;
                y[k] = x[k] + off;
                s += off * off;
            }
            if (s < r * r) break;
        }
    }
    std::array<int, 3> c{};
    for (int k = 0; k < g.d; ++k) c[k] = g.axis_cell(y[k]);
    return g.index(c);
}

double draw_offspring_target(const Field& q, const ReproductionEvent& ev,
                             const SelectionModel& model, UniformSource& us) {
    const TorusGrid& g = q.grid;
    auto parent_type = [&]() {
        std::size_t pc = sample_parent_cell(g, ev.x, ev.r, us);
        return us.next() < q.v[pc] ? 1 : 0;
    };

    if (!model.diploid()) {
        if (ev.kind == EventKind::neutral) return parent_type() ? 1.0 : 0.0;
        // Selective: m potential parents, offspring is type a w.p. p(mask).
        const GeneralFSelection& sel = model.haploid();
        unsigned mask = 0;
        for (int i = 0; i < sel.m; ++i) mask |= static_cast<unsigned>(parent_type()) << i;
        return us.next() < sel.p[mask] ? 1.0 : 0.0;
    }

    switch (ev.kind) {
        case EventKind::neutral: {
            int k1 = parent_type();
            int k2 = parent_type();
            return 0.5 * (k1 + k2);
        }
        case EventKind::mutation_1: return 0.0;  // offspring pair forced to {A2,A2}
        case EventKind::mutation_2: return 1.0;
        case EventKind::selective_1:
        case EventKind::selective_2: {
            // Four parents form two pairs; a pair of two disfavoured
            // homozygote alleles is discarded when exactly one occurs.
            int b[4];
            for (int& bit : b) bit = parent_type();
            const int bad_allele = ev.kind == EventKind::selective_1 ? 1 : 0;
            bool bad1 = b[0] == bad_allele && b[1] == bad_allele;
            bool bad2 = b[2] == bad_allele && b[3] == bad_allele;
            int first;
            if (bad1 == bad2)
                first = us.next() < 0.5 ? 0 : 2;
            else
                first = bad1 ? 2 : 0;
            return 0.5 * (b[first] + b[first + 1]);
        }
    }
    throw std::logic_error("draw_offspring_target: unknown event kind");
}

inline double move_toward(double q, double u, double target) {
    double out = (1.0 - u) * q + u * target;
    return out < 0.0 ? 0.0 : (out > 1.0 ? 1.0 : out);
}

}  // namespace

void apply_event(Field& q, const ReproductionEvent& ev, double u, const SelectionModel& model,
                 UniformSource& us) {
    const TorusGrid& g = q.grid;
    const double target = draw_offspring_target(q, ev, model, us);
    const double r2 = ev.r * ev.r;

    if (g.d == 1) {
        AxisRange ra = axis_range(g, ev.x[0], ev.r);
        if (ra.hi < ra.lo) throw std::runtime_error("apply_event: ball covers no cell");
        for (int i = ra.lo; i <= ra.hi; ++i) {
            std::size_t idx = static_cast<std::size_t>(g.wrap(i));
            q.v[idx] = move_toward(q.v[idx], u, target);
        }
        return;
    }

    bool touched = false;
    if (g.d == 2) {
        AxisRange ri = axis_range(g, ev.x[0], ev.r);
        for (int i = ri.lo; i <= ri.hi; ++i) {
            double dx = g.torus_delta(g.center(i), ev.x[0]);
            double rem = r2 - dx * dx;
            if (rem <= 0.0) continue;
            AxisRange rj = axis_range(g, ev.x[1], std::sqrt(rem));
            if (rj.hi < rj.lo) continue;
            std::size_t row = static_cast<std::size_t>(g.wrap(i)) * g.n;
            for (int j = rj.lo; j <= rj.hi; ++j) {
                std::size_t idx = row + static_cast<std::size_t>(g.wrap(j));
                q.v[idx] = move_toward(q.v[idx], u, target);
            }
            touched = true;
        }
    } else {
        AxisRange ri = axis_range(g, ev.x[0], ev.r);
        for (int i = ri.lo; i <= ri.hi; ++i) {
            double dx = g.torus_delta(g.center(i), ev.x[0]);
            double rem_i = r2 - dx * dx;
            if (rem_i <= 0.0) continue;
            AxisRange rj = axis_range(g, ev.x[1], std::sqrt(rem_i));
            for (int j = rj.lo; j <= rj.hi; ++j) {
                double dy = g.torus_delta(g.center(j), ev.x[1]);
                double rem = rem_i - dy * dy;
                if (rem <= 0.0) continue;
                AxisRange rk = axis_range(g, ev.x[2], std::sqrt(rem));
                if (rk.hi < rk.lo) continue;
                std::size_t row =
                    (static_cast<std::size_t>(g.wrap(i)) * g.n + static_cast<std::size_t>(g.wrap(j))) *
                    g.n;
                for (int k = rk.lo; k <= rk.hi; ++k) {
                    std::size_t idx = row + static_cast<std::size_t>(g.wrap(k));
                    q.v[idx] = move_toward(q.v[idx], u, target);
                }
                touched = true;
            }
        }
    }
    if (!touched) throw std::runtime_error("apply_event: ball covers no cell");
}

namespace {

EventKind draw_kind(const EventLaw& law, RngStream& rng) {
    double u = rng.next_u01();
    double acc = law.neutral_weight();
    if (u < acc) return EventKind::neutral;
    acc += law.sel1;
    if (u < acc) return EventKind::selective_1;
    acc += law.sel2;
    if (u < acc) return EventKind::selective_2;
    acc += law.mut1;
    if (u < acc) return EventKind::mutation_1;
    return EventKind::mutation_2;
}

void append_bytes(std::vector<char>& out, const void* p, std::size_t nbytes) {
    const char* c = static_cast<const char*>(p);
    out.insert(out.end(), c, c + nbytes);
}

void encode_event(std::vector<char>& out, const ReproductionEvent& ev, int d,
                  const std::vector<double>& uniforms) {
    append_bytes(out, &ev.t, 8);
    for (int k = 0; k < d; ++k) append_bytes(out, &ev.x[k], 8);
    append_bytes(out, &ev.r, 8);
    out.push_back(static_cast<char>(ev.kind));
    std::uint32_t count = static_cast<std::uint32_t>(uniforms.size());
    append_bytes(out, &count, 4);
    if (count) append_bytes(out, uniforms.data(), 8 * count);
}

struct SampleCursor {
    const std::vector<double>& times;
    std::size_t next = 0;

    // Emits every scheduled sample with time <= t_limit.
    template <typename Emit>
    void flush_until(double t_limit, Emit&& emit) {
        while (next < times.size() && times[next] <= t_limit) {
            emit(times[next]);
            ++next;
        }
    }
};

void validate_run_inputs(const Field& q0, const EventLaw& law, const SelectionModel& model,
                         const TrajectoryOptions& opts) {
    law.validate(q0.grid.d);
    if (law.diploid != model.diploid())
        throw std::invalid_argument("run_trajectory: law/model ploidy mismatch");
    if (!(opts.horizon > 0.0)) throw std::invalid_argument("run_trajectory: horizon must be > 0");
    if (!q0.in_unit_interval())
        throw std::invalid_argument("run_trajectory: initial field leaves [0,1]");
    if (2.0 * law.radius.max_radius() >= q0.grid.length)
        throw std::invalid_argument("run_trajectory: radius law reaches across the torus");
    if (!std::is_sorted(opts.sample_times.begin(), opts.sample_times.end()))
        throw std::invalid_argument("run_trajectory: sample times must be sorted");
}

}  // namespace

TrajectoryRecord run_trajectory(const Field& q0, const EventLaw& law, const SelectionModel& model,
                                const TrajectoryOptions& opts, std::span<const Observer> observers) {
    validate_run_inputs(q0, law, model, opts);
    const TorusGrid& g = q0.grid;
    const double rate = total_event_rate(law, g);
    if (rate * opts.horizon > opts.max_events)
        throw std::invalid_argument("run_trajectory: expected event count exceeds the bound");
    const double min_radius = 8.0 * g.h;

    TrajectoryRecord rec;
    rec.pareto_tail_fraction = law.radius.truncated_tail_fraction(g.d);
    rec.sample_times = opts.sample_times;
    rec.observations.assign(observers.size(), {});

    Field q = q0;
    RngStream rng(opts.seed, opts.stream);
    SampleCursor cursor{opts.sample_times};
    std::vector<double> uniforms;

    auto emit = [&](double ts) {
        for (std::size_t i = 0; i < observers.size(); ++i)
            rec.observations[i].push_back(observers[i].fn(ts, q));
        if (opts.keep_sample_fields) rec.sample_fields.push_back(q);
    };

    double t = 0.0;
    while (true) {
        double dt = rng.next_exponential(rate);
        double t_next = t + dt;
        cursor.flush_until(std::min(t_next, opts.horizon), emit);
        if (opts.dwell_hook) opts.dwell_hook(std::min(t_next, opts.horizon) - t, q);
        if (t_next > opts.horizon) break;
        t = t_next;

        ReproductionEvent ev;
        ev.t = t;
        for (int k = 0; k < g.d; ++k) ev.x[k] = rng.next_u01() * g.length;
        ev.r = sample_radius(law.radius, g.d, rng);
        if (ev.r < min_radius) {
            ev.r = min_radius;  // resolution contract clamp, counted and reported
            ++rec.radius_clamp_count;
        }
        ev.kind = draw_kind(law, rng);

        uniforms.clear();
        UniformSource us(rng, opts.keep_event_log ? &uniforms : nullptr);
        apply_event(q, ev, law.u, model, us);
        ++rec.event_count;
        if (opts.keep_event_log) encode_event(rec.event_log, ev, g.d, uniforms);
    }

    rec.final_field = std::move(q);
    return rec;
}

std::vector<LoggedEvent> decode_event_log(std::span<const char> log, int d) {
    std::vector<LoggedEvent> events;
    std::size_t pos = 0;
    auto need = [&](std::size_t nbytes, std::size_t record_index) {
        if (pos + nbytes > log.size())
            throw std::runtime_error("event log truncated after record " +
                                     std::to_string(record_index));
    };
    while (pos < log.size()) {
        std::size_t idx = events.size();
        LoggedEvent le;
        need(8 * (2 + d) + 1 + 4, idx);
        std::memcpy(&le.ev.t, log.data() + pos, 8);
        pos += 8;
        for (int k = 0; k < d; ++k) {
            std::memcpy(&le.ev.x[k], log.data() + pos, 8);
            pos += 8;
        }
        std::memcpy(&le.ev.r, log.data() + pos, 8);
        pos += 8;
        le.ev.kind = static_cast<EventKind>(log[pos]);
        pos += 1;
        std::uint32_t count = 0;
        std::memcpy(&count, log.data() + pos, 4);
        pos += 4;
        need(8 * static_cast<std::size_t>(count), idx);
        le.uniforms.resize(count);
        if (count) std::memcpy(le.uniforms.data(), log.data() + pos, 8 * count);
        pos += 8 * static_cast<std::size_t>(count);
        events.push_back(std::move(le));
    }
    return events;
}

TrajectoryRecord replay_trajectory(const Field& q0, const EventLaw& law,
                                   const SelectionModel& model, std::span<const char> event_log,
                                   const TrajectoryOptions& opts,
                                   std::span<const Observer> observers) {
    validate_run_inputs(q0, law, model, opts);
    auto events = decode_event_log(event_log, q0.grid.d);

    TrajectoryRecord rec;
    rec.sample_times = opts.sample_times;
    rec.observations.assign(observers.size(), {});
    Field q = q0;
    SampleCursor cursor{opts.sample_times};
    auto emit = [&](double ts) {
        for (std::size_t i = 0; i < observers.size(); ++i)
            rec.observations[i].push_back(observers[i].fn(ts, q));
        if (opts.keep_sample_fields) rec.sample_fields.push_back(q);
    };

    for (const LoggedEvent& le : events) {
        if (le.ev.t > opts.horizon) break;
        cursor.flush_until(le.ev.t, emit);
        UniformSource us(le.uniforms);
        apply_event(q, le.ev, law.u, model, us);
        ++rec.event_count;
    }
    cursor.flush_until(opts.horizon, emit);
    rec.final_field = std::move(q);
    return rec;
}

}  // namespace slfv
