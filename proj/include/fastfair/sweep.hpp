#ifndef FASTFAIR_SWEEP_HPP
#define FASTFAIR_SWEEP_HPP

#include "fastfair/scenario_file.hpp"
#include "fastfair/trace_io.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fastfair {

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
};

inline Scenario apply_overrides(Scenario sc, const RunOverrides& o) {
    if (o.seed) sc.seed = *o.seed;
    if (o.dt) sc.dt = *o.dt;
    validate(sc);
    return sc;
}

struct SweepPoint {
    double value = 0.0;
    EstimatorKind estimator = EstimatorKind::NaiveMin;
};

inline std::vector<SweepPoint> sweep_points(const SweepSpec& spec) {
    std::vector<SweepPoint> points;
    for (double v : spec.values) {
        for (auto e : spec.estimators) points.push_back({v, e});
    }
    return points;
}

/// Runs one sweep point; failures become a row with a non-ok status.
inline SummaryRow run_sweep_point(const SweepSpec& spec, const SweepPoint& point,
                                  const RunOverrides& overrides) {
    SummaryRow row;
    row.sweep_value = point.value;
    row.estimator = to_string(point.estimator);
    try {
        const Scenario sc =
            apply_overrides(build_scenario(apply_sweep_point(spec, point.value, point.estimator)),
                            overrides);
        const auto& target = sc.fairness_target();
        row.scenario = sc.name;
        row.n = static_cast<int>(sc.topology.flows.size()) - 1;
        row.capacity = bottleneck_capacity(sc, target);
        row.alpha = target.alpha;
        const Trace trace = run_scenario(sc);
        row = summarize(sc, trace);
        row.sweep_value = point.value;
    } catch (const SimulationError& err) {
        row.status = std::string("simulation_error: ") + err.what();
    } catch (const ValidationError& err) {
        row.status = std::string("invalid: ") + err.what();
    } catch (const std::exception& err) {
        row.status = std::string("error: ") + err.what();
    }
    return row;
}

/// Runs every (value, estimator) point on up to `workers` threads. Rows come
/// back in (value, estimator) order whatever the completion order.
inline std::vector<SummaryRow> run_sweep(
    const SweepSpec& spec, const RunOverrides& overrides = {}, int workers = 0,
    const std::function<void(const SummaryRow&)>& on_done = {}) {
    const auto points = sweep_points(spec);
    std::vector<SummaryRow> rows(points.size());
    if (workers <= 0) workers = spec.workers;
    workers = std::clamp(workers, 1, static_cast<int>(points.size()));

    std::atomic<std::size_t> next{0};
    std::mutex report;
    auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            rows[i] = run_sweep_point(spec, points[i], overrides);
            if (on_done) {
                std::lock_guard lock(report);
                on_done(rows[i]);
            }
        }
    };
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear(); // joins
    return rows;
}

} // namespace fastfair

#endif
