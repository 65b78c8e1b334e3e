#ifndef FASTFAIR_ANALYSIS_HPP
#define FASTFAIR_ANALYSIS_HPP

#include "fastfair/fluidsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fastfair {

/// Closed-form equilibrium after a single minimum-filter flow joins n flows
/// that know their true propagation delay.
struct EquilibriumPrediction {
    double b0_star = 0.0;          // packets buffered by the newcomer
    double x0_star = 0.0;          // newcomer rate
    double xf_star = 0.0;          // rate of each older flow
    double unfairness_ratio = 1.0; // x0_star / xf_star, 1 when n = 0
    double total_backlog = 0.0;    // b0_star + n alpha
};

inline EquilibriumPrediction predict_equilibrium(int n, double capacity, double alpha) {
    if (n < 0 || !(capacity > 0) || !(alpha > 0)) {
        throw std::invalid_argument("predict_equilibrium needs n >= 0, capacity > 0, alpha > 0");
    }
    EquilibriumPrediction p;
    p.b0_star = alpha / 2.0 * (1.0 + std::sqrt(1.0 + 4.0 * n));
    p.x0_star = alpha * capacity / p.b0_star;
    p.xf_star = alpha * capacity / (p.b0_star + n * alpha);
    p.unfairness_ratio = n == 0 ? 1.0 : p.x0_star / p.xf_star;
    p.total_backlog = p.b0_star + n * alpha;
    return p;
}

/// Smallest competitor round-trip propagation delay for which pausing the
/// newcomer for one RTT empties the bottleneck: n b0* / C.
inline double rr_threshold(int n, double capacity, double alpha) {
    if (n < 1) throw std::invalid_argument("rr_threshold needs n >= 1");
    return n * predict_equilibrium(n, capacity, alpha).b0_star / capacity;
}

/// Evaluates the drain condition directly: the equilibrium backlog B* must
/// empty at rate C - n xf* faster than the older flows' RTT d + B*/C.
/// Near-ties count as infeasible.
inline bool rr_drain_feasible(int n, double capacity, double alpha, double d) {
    if (n < 1) throw std::invalid_argument("rr_drain_feasible needs n >= 1");
    const auto eq = predict_equilibrium(n, capacity, alpha);
    const double drain_time = eq.total_backlog / (capacity - n * eq.xf_star);
    const double rtt = d + eq.total_backlog / capacity;
    return drain_time < rtt * (1.0 - 1e-12);
}

struct TimeWindow {
    double begin = 0.0;
    double end = 0.0;
};

/// Last 20% of the trace, pushed later if an estimator acted inside it.
inline TimeWindow default_fairness_window(const Trace& trace) {
    TimeWindow w{0.8 * trace.duration, trace.duration};
    for (const auto& e : trace.events) {
        if (e.kind != "drop") w.begin = std::max(w.begin, e.time);
    }
    return w;
}

namespace detail {

template <class F>
inline void for_rows_in(const Trace& trace, TimeWindow window, F&& fn) {
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        if (trace.times[k] >= window.begin && trace.times[k] <= window.end) fn(k);
    }
}

} // namespace detail

inline double mean_rate(const Trace& trace, const FlowId& flow, TimeWindow window) {
    const auto& s = trace.flow(flow);
    double sum = 0.0;
    std::size_t count = 0;
    detail::for_rows_in(trace, window, [&](std::size_t k) {
        sum += s.rate[k];
        ++count;
    });
    if (count == 0) throw std::invalid_argument("empty fairness window");
    return sum / static_cast<double>(count);
}

/// n mean(x0) / sum_f mean(x_f) over the window; 1 is perfectly fair.
inline double fairness_ratio(const Trace& trace, const FlowId& new_flow, TimeWindow window) {
    std::size_t rows = 0;
    detail::for_rows_in(trace, window, [&](std::size_t) { ++rows; });
    if (rows == 0) throw std::invalid_argument("empty fairness window");
    (void)trace.flow(new_flow);

    double others = 0.0;
    int n = 0;
    for (const auto& s : trace.flows) {
        detail::for_rows_in(trace, window, [&](std::size_t k) {
            if (!s.active[k]) {
                throw std::invalid_argument("flow '" + s.id + "' inactive inside the window");
            }
        });
        if (s.id == new_flow) continue;
        others += mean_rate(trace, s.id, window);
        ++n;
    }
    if (n == 0) return 1.0;
    return n * mean_rate(trace, new_flow, window) / others;
}

inline double fairness_ratio(const Trace& trace, const FlowId& new_flow) {
    return fairness_ratio(trace, new_flow, default_fairness_window(trace));
}

/// Mean over the window of the backlog summed over all links.
inline double mean_total_backlog(const Trace& trace, TimeWindow window) {
    double sum = 0.0;
    std::size_t count = 0;
    detail::for_rows_in(trace, window, [&](std::size_t k) {
        for (const auto& l : trace.links) sum += l.backlog[k];
        ++count;
    });
    if (count == 0) throw std::invalid_argument("empty window");
    return sum / static_cast<double>(count);
}

} // namespace fastfair

#endif
