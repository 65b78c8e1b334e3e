#ifndef FASTFAIR_ESTIMATORS_HPP
#define FASTFAIR_ESTIMATORS_HPP

#include "fastfair/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <iterator>
#include <limits>
#include <ranges>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fastfair {

/// Raised when a probe measurement cannot be turned into a delay correction.
class MeasurementFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One RTT observation as delivered to an estimator.
struct RttSample {
    double time = 0.0;      // when the sample is observed
    double rtt = 0.0;       // measured round-trip time
    double send_time = 0.0; // when the fluid that produced it was sent
    double rate = 0.0;      // flow's unmodulated rate w / rtt
    bool dropped = false;   // a finite buffer on the path overflowed
};

struct RateSample {
    double time = 0.0;
    double rate = 0.0;
};

struct EstimatorEvent {
    double time = 0.0;
    std::string kind;
    std::string detail;
};

namespace detail {

inline std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void push_rate(std::deque<RateSample>& history, const RttSample& s, double keep) {
    history.push_back({s.time, s.rate});
    while (history.size() > 2 && history[1].time <= s.time - keep) history.pop_front();
}

} // namespace detail

/// True iff the history spans at least `window` seconds and every rate in
/// the trailing `window` seconds lies within `tolerance` (relative) of their
/// mean.
template <std::ranges::bidirectional_range R>
bool detect_stable(const R& history, double window, double tolerance = 0.005) {
    if (std::ranges::empty(history) || window <= 0) return false;
    const double now = std::ranges::rbegin(history)->time;
    if (now - std::ranges::begin(history)->time < window) return false;

    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::size_t count = 0;
    for (auto it = std::ranges::rbegin(history); it != std::ranges::rend(history); ++it) {
        if (it->time < now - window) break;
        sum += it->rate;
        lo = std::min(lo, it->rate);
        hi = std::max(hi, it->rate);
        ++count;
    }
    if (count < 2) return false;
    const double mean = sum / static_cast<double>(count);
    if (!(mean > 0)) return false;
    return std::max(hi - mean, mean - lo) / mean < tolerance;
}

// ---------------------------------------------------------------------------
// Naive minimum filter

struct NaiveMinState {
    double d_hat = std::numeric_limits<double>::infinity();
};

inline void naive_update(NaiveMinState& state, double rtt_sample) {
    if (!(rtt_sample > 0)) throw std::invalid_argument("RTT sample must be positive");
    state.d_hat = std::min(state.d_hat, rtt_sample);
}

// ---------------------------------------------------------------------------
// Rate reduction: pause the flow for one RTT once it has stabilized and keep
// the minimum RTT seen, including whatever the pause uncovered.

enum class RrPhase { Warmup, Reduced, Done };

inline const char* to_string(RrPhase p) {
    switch (p) {
    case RrPhase::Warmup: return "warmup";
    case RrPhase::Reduced: return "reduced";
    case RrPhase::Done: return "done";
    }
    return "?";
}

struct RateReductionState {
    RrPhase phase = RrPhase::Warmup;
    double reduction_start = 0.0;
    double pause_duration = 0.0;
    NaiveMinState min_filter;
    std::deque<RateSample> history;

    double d_hat() const { return min_filter.d_hat; }
};

inline double rr_apply(RateReductionState& state, const EstimatorConfig& cfg,
                       const RttSample& sample, std::vector<EstimatorEvent>& events) {
    naive_update(state.min_filter, sample.rtt);
    switch (state.phase) {
    case RrPhase::Warmup: {
        const double window = cfg.stable_window_rtts * sample.rtt;
        detail::push_rate(state.history, sample, window);
        if (!detect_stable(state.history, window, cfg.stable_tolerance)) return 1.0;
        state.phase = RrPhase::Reduced;
        state.reduction_start = sample.time;
        state.pause_duration = cfg.pause_duration.value_or(sample.rtt);
        state.history.clear();
        events.push_back({sample.time, "rr_pause_start",
                          "pause=" + detail::fmt_g(state.pause_duration)
                              + ";d_hat=" + detail::fmt_g(state.d_hat())});
        return 0.0;
    }
    case RrPhase::Reduced:
        if (sample.time < state.reduction_start + state.pause_duration) return 0.0;
        state.phase = RrPhase::Done;
        events.push_back({sample.time, "rr_pause_end", "d_hat=" + detail::fmt_g(state.d_hat())});
        return 1.0;
    case RrPhase::Done:
        return 1.0;
    }
    return 1.0;
}

// ---------------------------------------------------------------------------
// ΔRTT probe

inline constexpr double kMinDeltaRtt = 1e-6;

/// Number of competing flows from the RTT shift caused by a probe of depth
/// theta lasting t_eps: with z = theta * t_eps / delta_r0, n = z (z - 1).
inline double probe_estimate_n(double theta, double t_eps, double delta_r0) {
    if (!(std::abs(delta_r0) >= kMinDeltaRtt)) {
        throw MeasurementFailure("RTT shift " + detail::fmt_g(delta_r0) + " s is too small");
    }
    if ((theta > 0) != (delta_r0 > 0)) {
        throw MeasurementFailure("RTT shift " + detail::fmt_g(delta_r0)
                                 + " s has the wrong sign for theta " + detail::fmt_g(theta));
    }
    const double z = theta * t_eps / delta_r0;
    return std::max(0.0, z * (z - 1.0));
}

/// Bottleneck capacity implied by n competitors and the flow's own
/// stabilized rate.
inline double probe_estimate_capacity(double n_hat, double x_star) {
    if (n_hat < 0 || !(x_star > 0)) {
        throw std::invalid_argument("capacity estimate needs n_hat >= 0 and x_star > 0");
    }
    return (1.0 + std::sqrt(1.0 + 4.0 * n_hat)) * x_star / 2.0;
}

/// Removes the n*alpha/C queueing bias from a minimum-filter delay estimate.
inline double probe_correct_delay(double d_hat_star, double alpha, double n_hat, double c_hat) {
    if (!(c_hat > 0) || n_hat < 0) {
        throw std::invalid_argument("delay correction needs c_hat > 0 and n_hat >= 0");
    }
    const double corrected = d_hat_star - alpha * n_hat / c_hat;
    if (!(corrected > 0)) {
        throw MeasurementFailure("corrected delay " + detail::fmt_g(corrected)
                                 + " s is not positive");
    }
    return corrected;
}

enum class ProbePhase { Warmup, Stabilizing, Probing, Settling, Corrected, Failed };

inline const char* to_string(ProbePhase p) {
    switch (p) {
    case ProbePhase::Warmup: return "warmup";
    case ProbePhase::Stabilizing: return "stabilizing";
    case ProbePhase::Probing: return "probing";
    case ProbePhase::Settling: return "settling";
    case ProbePhase::Corrected: return "corrected";
    case ProbePhase::Failed: return "failed";
    }
    return "?";
}

struct DeltaProbeState {
    ProbePhase phase = ProbePhase::Warmup;
    double alpha = 50.0;
    double theta = -0.5;
    double t_eps = 0.0;
    double r_star = 0.0;
    double x_star = 0.0;
    double d_hat_star = 0.0;
    double r_prime = 0.0;
    double probe_start = 0.0;
    double probe_end = 0.0;
    bool probe_dropped = false;
    int retries = 0;
    double n_hat = 0.0;
    double c_hat = 0.0;
    double corrected = 0.0;
    NaiveMinState min_filter;
    std::deque<RateSample> history;

    double d_hat() const { return phase == ProbePhase::Corrected ? corrected : min_filter.d_hat; }
};

namespace detail {

inline void probe_retry(DeltaProbeState& s, const EstimatorConfig& cfg, double now,
                        const std::string& reason, std::vector<EstimatorEvent>& events) {
    s.history.clear();
    if (s.retries >= cfg.max_retries) {
        s.phase = ProbePhase::Failed;
        events.push_back({now, "failure",
                          "reason=" + reason + ";retries=" + std::to_string(s.retries)
                              + ";d_hat=" + fmt_g(s.min_filter.d_hat)});
        return;
    }
    ++s.retries;
    s.theta = -std::abs(s.theta) / 2.0;
    s.phase = ProbePhase::Stabilizing;
    events.push_back({now, "retry",
                      "reason=" + reason + ";theta=" + fmt_g(s.theta)
                          + ";retries=" + std::to_string(s.retries)});
}

} // namespace detail

/// Drives one flow through stabilize -> probe -> settle -> correct.
///
/// The returned multiplier scales the flow's window-derived rate. While
/// probing, it pins the rate to (1 - theta) x* so the flow sends at exactly
/// the modulated stabilized rate.
inline double probe_controller(DeltaProbeState& s, const EstimatorConfig& cfg,
                               const RttSample& sample, std::vector<EstimatorEvent>& events) {
    naive_update(s.min_filter, sample.rtt);
    const double window = cfg.stable_window_rtts * sample.rtt;

    switch (s.phase) {
    case ProbePhase::Warmup:
    case ProbePhase::Stabilizing: {
        detail::push_rate(s.history, sample, window);
        if (s.phase == ProbePhase::Warmup) {
            if (s.history.back().time - s.history.front().time < window) return 1.0;
            s.phase = ProbePhase::Stabilizing;
        }
        if (!detect_stable(s.history, window, cfg.stable_tolerance)) return 1.0;
        s.r_star = sample.rtt;
        s.x_star = sample.rate;
        s.d_hat_star = s.min_filter.d_hat;
        s.t_eps = cfg.t_eps.value_or(s.r_star);
        s.probe_start = sample.time;
        s.probe_dropped = false;
        s.phase = ProbePhase::Probing;
        events.push_back({sample.time, "probe_start",
                          "theta=" + detail::fmt_g(s.theta) + ";t_eps=" + detail::fmt_g(s.t_eps)
                              + ";r_star=" + detail::fmt_g(s.r_star)
                              + ";x_star=" + detail::fmt_g(s.x_star)});
        return (1.0 - s.theta) * s.x_star / sample.rate;
    }
    case ProbePhase::Probing:
        s.probe_dropped = s.probe_dropped || sample.dropped;
        if (sample.time < s.probe_start + s.t_eps) {
            return (1.0 - s.theta) * s.x_star / sample.rate;
        }
        // The rate was held for whole steps; use the duration actually applied.
        s.probe_end = sample.time;
        s.t_eps = s.probe_end - s.probe_start;
        s.phase = ProbePhase::Settling;
        events.push_back({sample.time, "probe_end",
                          "theta=" + detail::fmt_g(s.theta) + ";t_eps=" + detail::fmt_g(s.t_eps)
                              + (s.probe_dropped ? ";dropped=1" : "")});
        return 1.0;
    case ProbePhase::Settling: {
        // r' is the RTT of the first fluid sent once the probe is over.
        if (sample.send_time < s.probe_end) return 1.0;
        s.r_prime = sample.rtt;
        const double delta_r0 = s.r_star - s.r_prime;
        if (s.probe_dropped) {
            detail::probe_retry(s, cfg, sample.time, "drop", events);
            return 1.0;
        }
        // A draining probe that uncovered a new minimum emptied the queue
        // before the end of the measurement.
        if (s.theta > 0 && s.r_prime < s.d_hat_star) {
            detail::probe_retry(s, cfg, sample.time, "queue_exhausted", events);
            return 1.0;
        }
        try {
            const double n_hat = probe_estimate_n(s.theta, s.t_eps, delta_r0);
            const double c_hat = probe_estimate_capacity(n_hat, s.x_star);
            const double corrected = probe_correct_delay(s.d_hat_star, s.alpha, n_hat, c_hat);
            s.n_hat = n_hat;
            s.c_hat = c_hat;
            s.corrected = corrected;
            s.phase = ProbePhase::Corrected;
            events.push_back({sample.time, "correction",
                              "theta=" + detail::fmt_g(s.theta) + ";t_eps=" + detail::fmt_g(s.t_eps)
                                  + ";delta_r0=" + detail::fmt_g(delta_r0)
                                  + ";n_hat=" + detail::fmt_g(n_hat)
                                  + ";c_hat=" + detail::fmt_g(c_hat)
                                  + ";d_hat_prime=" + detail::fmt_g(corrected)});
        } catch (const MeasurementFailure& err) {
            detail::probe_retry(s, cfg, sample.time, "measurement", events);
        }
        return 1.0;
    }
    case ProbePhase::Corrected:
    case ProbePhase::Failed:
        return 1.0;
    }
    return 1.0;
}

// ---------------------------------------------------------------------------

/// A flow's propagation-delay estimator: one of the three strategies behind a
/// common per-sample interface.
class Estimator {
public:
    Estimator(const EstimatorConfig& config, double alpha) : config_(config) {
        switch (config.kind) {
        case EstimatorKind::NaiveMin: state_ = NaiveMinState{}; break;
        case EstimatorKind::RateReduction: state_ = RateReductionState{}; break;
        case EstimatorKind::DeltaProbe: {
            DeltaProbeState s;
            s.alpha = alpha;
            s.theta = config.theta;
            state_ = std::move(s);
            break;
        }
        }
    }

    /// Feeds one RTT sample; returns the rate multiplier for this step.
    /// A multiplier other than 1 means the estimator is steering the rate
    /// and the window should be held.
    double observe(const RttSample& sample, std::vector<EstimatorEvent>& events) {
        if (auto* naive = std::get_if<NaiveMinState>(&state_)) {
            naive_update(*naive, sample.rtt);
            return 1.0;
        }
        if (auto* rr = std::get_if<RateReductionState>(&state_)) {
            return rr_apply(*rr, config_, sample, events);
        }
        return probe_controller(std::get<DeltaProbeState>(state_), config_, sample, events);
    }

    double d_hat() const {
        return std::visit(
            [](const auto& s) {
                if constexpr (std::is_same_v<std::decay_t<decltype(s)>, NaiveMinState>) {
                    return s.d_hat;
                } else {
                    return s.d_hat();
                }
            },
            state_);
    }

    std::string phase() const {
        if (const auto* rr = std::get_if<RateReductionState>(&state_)) return to_string(rr->phase);
        if (const auto* dp = std::get_if<DeltaProbeState>(&state_)) return to_string(dp->phase);
        return "min_filter";
    }

    const EstimatorConfig& config() const { return config_; }
    const DeltaProbeState* probe_state() const { return std::get_if<DeltaProbeState>(&state_); }
    const RateReductionState* rr_state() const { return std::get_if<RateReductionState>(&state_); }

private:
    EstimatorConfig config_;
    std::variant<NaiveMinState, RateReductionState, DeltaProbeState> state_;
};

} // namespace fastfair

#endif
