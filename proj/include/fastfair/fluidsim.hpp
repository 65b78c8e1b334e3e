#ifndef FASTFAIR_FLUIDSIM_HPP
#define FASTFAIR_FLUIDSIM_HPP

#include "fastfair/estimators.hpp"
#include "fastfair/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fastfair {

/// Raised when the integration produces a non-finite or negative state.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Fluid queue

struct QueueUpdate {
    double backlog = 0.0;
    double outflow = 0.0; // packets/s served during the step
    bool dropped = false;
};

/// One explicit step of b' = inflow - capacity, floored at zero and clamped
/// to a finite buffer.
inline QueueUpdate queue_dynamics(const LinkSpec& link, double backlog, double aggregate_inflow,
                                  double dt) {
    if (aggregate_inflow < 0) throw std::invalid_argument("inflow must be >= 0");
    QueueUpdate out;
    const double next = backlog + (aggregate_inflow - link.capacity) * dt;
    if (next <= 0) {
        out.backlog = 0.0;
        out.outflow = backlog / dt + aggregate_inflow;
    } else {
        out.backlog = next;
        out.outflow = link.capacity;
    }
    if (link.buffer_limit && out.backlog > *link.buffer_limit) {
        out.backlog = *link.buffer_limit;
        out.dropped = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Delayed feedback

/// Per-link backlog history on the integration grid.
///
/// A flow observing at time t sees the RTT of the fluid it sent at the time s
/// solving s + d + Q(s) = t, where d is the round-trip propagation delay and
/// Q(s) the queueing delay along the path at s. Backlog between grid points
/// is linearly interpolated; before t = 0 the network is empty.
class DelayedSignalBuffer {
public:
    struct Observation {
        double rtt = 0.0;
        double send_time = 0.0;
    };

    DelayedSignalBuffer(std::vector<double> capacities, double dt)
        : capacities_(std::move(capacities)), dt_(dt) {}

    double dt() const { return dt_; }
    std::size_t link_count() const { return capacities_.size(); }
    double oldest_time() const { return static_cast<double>(first_) * dt_; }
    double latest_time() const {
        return samples_.empty() ? 0.0 : static_cast<double>(first_ + samples_.size() - 1) * dt_;
    }
    double depth() const { return latest_time() - oldest_time(); }

    /// Appends the backlogs at the next grid time.
    void push(std::span<const double> backlogs) {
        samples_.emplace_back(backlogs.begin(), backlogs.end());
        double q = 0.0;
        for (std::size_t l = 0; l < capacities_.size(); ++l) q += backlogs[l] / capacities_[l];
        max_total_delay_ = std::max(max_total_delay_, q);
    }

    /// Drops samples no lookup can need anymore given the longest
    /// propagation delay of any flow.
    void trim(double now, double max_prop_delay) {
        const double keep = max_prop_delay + max_total_delay_ + 10.0 * dt_;
        while (samples_.size() > 2 && static_cast<double>(first_ + 1) * dt_ < now - keep) {
            samples_.pop_front();
            ++first_;
        }
    }

    double backlog_at(std::size_t link, double t) const {
        if (t < 0 || samples_.empty()) return 0.0;
        const double pos = t / dt_ - static_cast<double>(first_);
        if (pos <= 0) return samples_.front()[link];
        const auto last = samples_.size() - 1;
        if (pos >= static_cast<double>(last)) return samples_.back()[link];
        const auto k = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(k);
        return samples_[k][link] + frac * (samples_[k + 1][link] - samples_[k][link]);
    }

    double path_delay_at(std::span<const std::size_t> path, double t) const {
        double q = 0.0;
        for (auto l : path) q += backlog_at(l, t) / capacities_[l];
        return q;
    }

    Observation observe(std::span<const std::size_t> path, double prop_rtt, double t) const {
        const double target = t - prop_rtt;
        if (target < oldest_time() || samples_.empty()) {
            return {prop_rtt, target}; // nothing queued before the network started
        }
        auto path_q = [&](std::size_t k) {
            double q = 0.0;
            for (auto l : path) q += samples_[k][l] / capacities_[l];
            return q;
        };
        auto arrival = [&](std::size_t k) {
            return static_cast<double>(first_ + k) * dt_ + path_q(k);
        };
        const std::size_t last = samples_.size() - 1;
        if (arrival(0) > target) return {t - oldest_time(), oldest_time()};
        if (arrival(last) <= target) {
            const double q = path_q(last);
            return {prop_rtt + q, target - q};
        }
        // arrival(lo) <= target < arrival(hi)
        std::size_t lo = 0;
        std::size_t hi = last;
        while (hi - lo > 1) {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (arrival(mid) <= target) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        const double g_lo = arrival(lo);
        const double g_hi = arrival(hi);
        const double frac = g_hi > g_lo ? (target - g_lo) / (g_hi - g_lo) : 0.0;
        const double send = (static_cast<double>(first_ + lo) + frac) * dt_;
        return {t - send, send};
    }

private:
    std::vector<double> capacities_;
    double dt_;
    std::size_t first_ = 0;
    std::deque<std::vector<double>> samples_;
    double max_total_delay_ = 0.0;
};

// ---------------------------------------------------------------------------
// Pareto on/off background traffic

/// Piecewise-constant rate: peak during the listed on intervals, zero
/// otherwise.
class OnOffSchedule {
public:
    OnOffSchedule() = default;
    OnOffSchedule(std::vector<std::pair<double, double>> on, double peak, double horizon)
        : on_(std::move(on)), peak_(peak), horizon_(horizon) {}

    const std::vector<std::pair<double, double>>& on_intervals() const { return on_; }
    double peak_rate() const { return peak_; }
    double horizon() const { return horizon_; }

    double rate_at(double t) const {
        auto it = std::upper_bound(on_.begin(), on_.end(), t,
                                   [](double v, const auto& iv) { return v < iv.first; });
        if (it == on_.begin()) return 0.0;
        --it;
        return t < it->second ? peak_ : 0.0;
    }

    /// Average rate over [t0, t1).
    double mean_rate(double t0, double t1) const {
        if (peak_ == 0 || t1 <= t0) return 0.0;
        auto it = std::upper_bound(on_.begin(), on_.end(), t0,
                                   [](double v, const auto& iv) { return v < iv.first; });
        if (it != on_.begin()) --it;
        double on_time = 0.0;
        for (; it != on_.end() && it->first < t1; ++it) {
            on_time += std::max(0.0, std::min(t1, it->second) - std::max(t0, it->first));
        }
        return peak_ * on_time / (t1 - t0);
    }

private:
    std::vector<std::pair<double, double>> on_;
    double peak_ = 0.0;
    double horizon_ = 0.0;
};

namespace detail {

// Uniform in (0, 1], independent of the standard library's distributions so
// schedules are identical across toolchains.
inline double unit_open_low(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

inline double pareto_draw(std::mt19937_64& rng, double shape, double mean) {
    const double scale = mean * (shape - 1.0) / shape;
    return scale / std::pow(unit_open_low(rng), 1.0 / shape);
}

} // namespace detail

/// Alternating Pareto-distributed bursts and idles covering [0, horizon),
/// starting with a burst.
inline OnOffSchedule pareto_background(const ParetoSourceSpec& spec, std::uint64_t seed,
                                       double horizon) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<double, double>> on;
    double t = 0.0;
    while (t < horizon) {
        const double burst = detail::pareto_draw(rng, spec.shape, spec.mean_burst);
        const double idle = detail::pareto_draw(rng, spec.shape, spec.mean_idle);
        on.emplace_back(t, t + burst);
        t += burst + idle;
    }
    return OnOffSchedule(std::move(on), spec.peak_rate, horizon);
}

// ---------------------------------------------------------------------------
// Window dynamics

/// dw/dt = kappa (1 - q x / alpha), with kappa = gamma alpha / rtt for FAST or
/// 1 / rtt for Vegas.
inline double window_derivative(double queueing_delay, double rate, double rtt, double alpha,
                                double gamma, GainKind gain = GainKind::Fast) {
    const double kappa = gain == GainKind::Fast ? gamma * alpha / rtt : 1.0 / rtt;
    return kappa * (1.0 - queueing_delay * rate / alpha);
}

struct FlowState {
    double w = 0.0;
    double x = 0.0;
    double d_hat = 0.0;
    bool active = false;
    double rtt_current = 0.0;
    double send_time = 0.0;
    double multiplier = 1.0;
    Estimator estimator;
};

struct QueueState {
    std::vector<double> backlog;
    std::vector<bool> drop_flag;
};

// ---------------------------------------------------------------------------
// Trace

struct FlowSeries {
    FlowId id;
    std::vector<double> rate;
    std::vector<double> window;
    std::vector<double> rtt;
    std::vector<double> d_hat;
    std::vector<char> active;
};

struct LinkSeries {
    LinkId id;
    std::vector<double> backlog;
};

struct TraceEvent {
    double time = 0.0;
    FlowId flow;
    std::string kind;
    std::string detail;
};

struct Trace {
    std::vector<double> times;
    std::vector<FlowSeries> flows;
    std::vector<LinkSeries> links;
    std::vector<TraceEvent> events;
    double duration = 0.0;

    const FlowSeries& flow(const FlowId& id) const {
        for (const auto& f : flows) {
            if (f.id == id) return f;
        }
        throw std::out_of_range("no flow '" + id + "' in trace");
    }
    const LinkSeries& link(const LinkId& id) const {
        for (const auto& l : links) {
            if (l.id == id) return l;
        }
        throw std::out_of_range("no link '" + id + "' in trace");
    }
};

// ---------------------------------------------------------------------------

/// Fixed-step explicit Euler integrator of the flow-level window dynamics
/// over fluid queues.
class Simulator {
public:
    explicit Simulator(Scenario scenario) : scenario_(std::move(scenario)) {
        validate(scenario_);
        const auto& topo = scenario_.topology;
        std::vector<double> caps;
        for (const auto& l : topo.links) caps.push_back(l.capacity);
        buffer_.emplace(caps, scenario_.dt);

        auto index_of = [&](const LinkId& id) {
            for (std::size_t i = 0; i < topo.links.size(); ++i) {
                if (topo.links[i].id == id) return i;
            }
            throw ValidationError("unknown link '" + id + "'");
        };
        for (const auto& f : topo.flows) {
            std::vector<std::size_t> path;
            for (const auto& hop : f.path) path.push_back(index_of(hop));
            paths_.push_back(std::move(path));
            prop_.push_back(topo.round_trip_delay(f));
            max_prop_ = std::max(max_prop_, prop_.back());
            flows_.push_back(FlowState{.estimator = Estimator(f.estimator, f.alpha)});
        }
        if (scenario_.background) {
            for (const auto& hop : scenario_.background->path) {
                background_path_.push_back(index_of(hop));
            }
            background_ = pareto_background(*scenario_.background, scenario_.seed,
                                            scenario_.duration + 1.0);
        }
        queues_.backlog.assign(topo.links.size(), 0.0);
        queues_.drop_flag.assign(topo.links.size(), false);
        inflow_.assign(topo.links.size(), 0.0);
        buffer_->push(queues_.backlog);

        steps_ = static_cast<std::int64_t>(std::llround(scenario_.duration / scenario_.dt));
        record_every_ = std::max<std::int64_t>(
            1, std::llround(scenario_.output_interval / scenario_.dt));
        for (const auto& f : topo.flows) trace_.flows.emplace_back().id = f.id;
        for (const auto& l : topo.links) trace_.links.emplace_back().id = l.id;
        trace_.duration = scenario_.duration;
    }

    const Scenario& scenario() const { return scenario_; }
    double time() const { return static_cast<double>(step_index_) * scenario_.dt; }
    std::int64_t step_index() const { return step_index_; }
    std::int64_t total_steps() const { return steps_; }
    bool done() const { return step_index_ >= steps_; }
    const std::vector<FlowState>& flows() const { return flows_; }
    const QueueState& queues() const { return queues_; }
    const std::vector<double>& last_inflow() const { return inflow_; }
    const std::vector<QueueUpdate>& last_queue_updates() const { return last_updates_; }
    const DelayedSignalBuffer& signal() const { return *buffer_; }
    const Trace& trace() const { return trace_; }

    /// Advances every active flow and every queue by one dt.
    void step() {
        const double t = time();
        const double dt = scenario_.dt;
        const auto& topo = scenario_.topology;
        const bool record = step_index_ % record_every_ == 0;

        for (std::size_t i = 0; i < flows_.size(); ++i) {
            auto& fs = flows_[i];
            const auto& spec = topo.flows[i];
            if (!fs.active && spec.start_time <= t + 1e-9 * dt) {
                fs.active = true;
                fs.w = spec.alpha;
            }
            if (!fs.active) continue;

            const auto obs = buffer_->observe(paths_[i], prop_[i], t);
            fs.rtt_current = obs.rtt;
            fs.send_time = obs.send_time;
            bool dropped = false;
            for (auto l : paths_[i]) dropped = dropped || queues_.drop_flag[l];
            const double base = fs.w / obs.rtt;
            const RttSample sample{t, obs.rtt, obs.send_time, base, dropped};
            const auto before = events_scratch_.size();
            fs.multiplier = fs.estimator.observe(sample, events_scratch_);
            for (auto e = before; e < events_scratch_.size(); ++e) {
                auto& ev = events_scratch_[e];
                trace_.events.push_back({ev.time, spec.id, std::move(ev.kind), std::move(ev.detail)});
            }
            events_scratch_.clear();
            fs.x = fs.multiplier * base;
            fs.d_hat = fs.estimator.d_hat();
            if (!std::isfinite(fs.x) || fs.x < 0 || !std::isfinite(obs.rtt)) {
                throw SimulationError("flow '" + spec.id + "' at t=" + detail::fmt_g(t)
                                      + ": invalid rate " + detail::fmt_g(fs.x));
            }
        }

        if (record) record_row(t);

        for (std::size_t i = 0; i < flows_.size(); ++i) {
            auto& fs = flows_[i];
            if (!fs.active || fs.multiplier != 1.0) continue; // window held while steered
            const auto& spec = topo.flows[i];
            const double q = std::max(0.0, fs.rtt_current - fs.d_hat);
            const double wdot =
                window_derivative(q, fs.x, fs.rtt_current, spec.alpha, spec.gamma, spec.gain);
            fs.w = std::max(1.0, fs.w + dt * wdot);
            if (!std::isfinite(fs.w)) {
                throw SimulationError("flow '" + spec.id + "' at t=" + detail::fmt_g(t)
                                      + ": window diverged");
            }
        }

        std::fill(inflow_.begin(), inflow_.end(), 0.0);
        for (std::size_t i = 0; i < flows_.size(); ++i) {
            if (!flows_[i].active) continue;
            for (auto l : paths_[i]) inflow_[l] += flows_[i].x;
        }
        if (scenario_.background) {
            const double bg = background_.mean_rate(t, t + dt);
            for (auto l : background_path_) inflow_[l] += bg;
        }
        last_updates_.resize(topo.links.size());
        for (std::size_t l = 0; l < topo.links.size(); ++l) {
            last_updates_[l] = queue_dynamics(topo.links[l], queues_.backlog[l], inflow_[l], dt);
            queues_.backlog[l] = last_updates_[l].backlog;
            if (last_updates_[l].dropped && !queues_.drop_flag[l]) {
                trace_.events.push_back(
                    {t + dt, "-", "drop", "link=" + topo.links[l].id});
            }
            queues_.drop_flag[l] = last_updates_[l].dropped;
        }
        buffer_->push(queues_.backlog);
        ++step_index_;
        buffer_->trim(time(), max_prop_);
    }

    Trace run() {
        while (!done()) step();
        return trace_;
    }

private:
    void record_row(double t) {
        trace_.times.push_back(t);
        for (std::size_t i = 0; i < flows_.size(); ++i) {
            const auto& fs = flows_[i];
            auto& s = trace_.flows[i];
            s.rate.push_back(fs.active ? fs.x : 0.0);
            s.window.push_back(fs.active ? fs.w : 0.0);
            s.rtt.push_back(fs.active ? fs.rtt_current : 0.0);
            s.d_hat.push_back(fs.active ? fs.d_hat : 0.0);
            s.active.push_back(fs.active ? 1 : 0);
        }
        for (std::size_t l = 0; l < queues_.backlog.size(); ++l) {
            trace_.links[l].backlog.push_back(queues_.backlog[l]);
        }
    }

    Scenario scenario_;
    std::optional<DelayedSignalBuffer> buffer_;
    std::vector<std::vector<std::size_t>> paths_;
    std::vector<double> prop_;
    double max_prop_ = 0.0;
    std::vector<FlowState> flows_;
    QueueState queues_;
    std::vector<double> inflow_;
    std::vector<QueueUpdate> last_updates_;
    std::vector<std::size_t> background_path_;
    OnOffSchedule background_;
    std::vector<EstimatorEvent> events_scratch_;
    Trace trace_;
    std::int64_t steps_ = 0;
    std::int64_t step_index_ = 0;
    std::int64_t record_every_ = 1;
};

inline Trace run_scenario(const Scenario& scenario) {
    Simulator sim(scenario);
    return sim.run();
}

} // namespace fastfair

#endif
