#ifndef FASTFAIR_MODEL_HPP
#define FASTFAIR_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fastfair {

// Internal units are packets and seconds. Mb/s inputs convert with a fixed
// 1000-byte packet.
inline constexpr double kPacketBits = 8000.0;

constexpr double mbps_to_pkts(double mbps) { return mbps * 1e6 / kPacketBits; }
constexpr double pkts_to_mbps(double pkts) { return pkts * kPacketBits / 1e6; }

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using LinkId = std::string;
using FlowId = std::string;

struct LinkSpec {
    LinkId id;
    double capacity = 0.0;   // packets/s
    double prop_delay = 0.0; // seconds, one way
    std::optional<double> buffer_limit; // packets; unbounded when empty
};

enum class EstimatorKind { NaiveMin, RateReduction, DeltaProbe };

inline const char* to_string(EstimatorKind kind) {
    switch (kind) {
    case EstimatorKind::NaiveMin: return "naive_min";
    case EstimatorKind::RateReduction: return "rate_reduction";
    case EstimatorKind::DeltaProbe: return "delta_probe";
    }
    return "unknown";
}

inline EstimatorKind parse_estimator_kind(const std::string& name) {
    if (name == "naive_min" || name == "fast") return EstimatorKind::NaiveMin;
    if (name == "rate_reduction" || name == "rr") return EstimatorKind::RateReduction;
    if (name == "delta_probe" || name == "probe") return EstimatorKind::DeltaProbe;
    throw ValidationError("unknown estimator '" + name + "'");
}

/// Strategy parameters for a flow's propagation-delay estimator.
///
/// Unset durations are filled in from the flow's measured RTT at the moment
/// they are needed (probe length t_eps = r*, rate-reduction pause = one RTT).
struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::NaiveMin;
    double theta = -0.5;
    std::optional<double> t_eps;
    std::optional<double> pause_duration;
    int max_retries = 3;
    double stable_tolerance = 0.001;
    double stable_window_rtts = 5.0;
};

enum class GainKind { Fast, Vegas };

struct FlowSpec {
    FlowId id;
    std::vector<LinkId> path;
    std::optional<double> reverse_delay; // defaults to the forward propagation delay
    double alpha = 50.0;
    double gamma = 0.5;
    double start_time = 0.0;
    GainKind gain = GainKind::Fast;
    EstimatorConfig estimator;
};

struct Topology {
    std::vector<LinkSpec> links;
    std::vector<FlowSpec> flows;

    const LinkSpec* find_link(const LinkId& id) const {
        auto it = std::find_if(links.begin(), links.end(),
                               [&](const LinkSpec& l) { return l.id == id; });
        return it == links.end() ? nullptr : &*it;
    }
    const FlowSpec* find_flow(const FlowId& id) const {
        auto it = std::find_if(flows.begin(), flows.end(),
                               [&](const FlowSpec& f) { return f.id == id; });
        return it == flows.end() ? nullptr : &*it;
    }
    FlowSpec* find_flow(const FlowId& id) {
        auto it = std::find_if(flows.begin(), flows.end(),
                               [&](const FlowSpec& f) { return f.id == id; });
        return it == flows.end() ? nullptr : &*it;
    }

    double forward_delay(const FlowSpec& flow) const {
        double sum = 0.0;
        for (const auto& id : flow.path) {
            if (const auto* link = find_link(id)) sum += link->prop_delay;
        }
        return sum;
    }

    /// Round-trip propagation delay d_i: forward path plus the (uncongested)
    /// reverse path.
    double round_trip_delay(const FlowSpec& flow) const {
        const double fwd = forward_delay(flow);
        return fwd + flow.reverse_delay.value_or(fwd);
    }
};

struct ParetoSourceSpec {
    std::vector<LinkId> path;
    double shape = 1.25;
    double mean_burst = 0.1;
    double mean_idle = 0.1;
    double peak_rate = 0.0; // packets/s
};

struct Scenario {
    std::string name = "scenario";
    Topology topology;
    double duration = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 1;
    std::optional<ParetoSourceSpec> background;
    double output_interval = 0.1;
    // Flow whose fairness against the others is reported. Defaults to the
    // latest starter.
    std::optional<FlowId> new_flow;

    double min_round_trip_delay() const {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& f : topology.flows) best = std::min(best, topology.round_trip_delay(f));
        return best;
    }

    const FlowSpec& fairness_target() const {
        if (new_flow) {
            if (const auto* f = topology.find_flow(*new_flow)) return *f;
            throw ValidationError("new_flow '" + *new_flow + "' is not a flow of the topology");
        }
        if (topology.flows.empty()) throw ValidationError("scenario has no flows");
        const FlowSpec* latest = &topology.flows.front();
        for (const auto& f : topology.flows) {
            if (f.start_time >= latest->start_time) latest = &f;
        }
        return *latest;
    }
};

namespace detail {
inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}
} // namespace detail

inline void validate(const LinkSpec& link) {
    using detail::require;
    require(!link.id.empty(), "link id must not be empty");
    require(std::isfinite(link.capacity) && link.capacity > 0,
            "link '" + link.id + "': capacity must be > 0");
    require(std::isfinite(link.prop_delay) && link.prop_delay >= 0,
            "link '" + link.id + "': propagation delay must be >= 0");
    if (link.buffer_limit) {
        require(*link.buffer_limit > 0, "link '" + link.id + "': buffer limit must be > 0");
    }
}

inline void validate(const EstimatorConfig& cfg, const std::string& where) {
    using detail::require;
    require(std::isfinite(cfg.theta) && std::abs(cfg.theta) < 1.0 && cfg.theta != 0.0,
            where + ": theta must satisfy 0 < |theta| < 1");
    if (cfg.t_eps) require(*cfg.t_eps > 0, where + ": t_eps must be > 0");
    if (cfg.pause_duration) require(*cfg.pause_duration > 0, where + ": pause duration must be > 0");
    require(cfg.max_retries >= 0, where + ": max_retries must be >= 0");
    require(cfg.stable_tolerance > 0, where + ": stability tolerance must be > 0");
    require(cfg.stable_window_rtts > 0, where + ": stability window must be > 0");
}

inline void validate(const Topology& topo) {
    using detail::require;
    std::set<LinkId> link_ids;
    for (const auto& link : topo.links) {
        validate(link);
        require(link_ids.insert(link.id).second, "duplicate link id '" + link.id + "'");
    }
    std::set<FlowId> flow_ids;
    for (const auto& flow : topo.flows) {
        const std::string where = "flow '" + flow.id + "'";
        require(!flow.id.empty(), "flow id must not be empty");
        require(flow_ids.insert(flow.id).second, "duplicate flow id '" + flow.id + "'");
        require(!flow.path.empty(), where + ": path must not be empty");
        std::set<LinkId> seen;
        for (const auto& hop : flow.path) {
            require(link_ids.count(hop) == 1, where + ": unknown link '" + hop + "'");
            require(seen.insert(hop).second, where + ": link '" + hop + "' repeated in path");
        }
        require(std::isfinite(flow.alpha) && flow.alpha > 0, where + ": alpha must be > 0");
        require(flow.gamma > 0 && flow.gamma <= 1, where + ": gamma must be in (0, 1]");
        require(std::isfinite(flow.start_time) && flow.start_time >= 0,
                where + ": start time must be >= 0");
        if (flow.reverse_delay) {
            require(*flow.reverse_delay >= 0, where + ": reverse delay must be >= 0");
        }
        require(topo.round_trip_delay(flow) > 0,
                where + ": round-trip propagation delay must be > 0");
        validate(flow.estimator, where);
    }
}

inline void validate(const ParetoSourceSpec& spec, const Topology& topo) {
    using detail::require;
    require(!spec.path.empty(), "background: path must not be empty");
    for (const auto& hop : spec.path) {
        require(topo.find_link(hop) != nullptr, "background: unknown link '" + hop + "'");
    }
    require(spec.shape > 1, "background: Pareto shape must be > 1");
    require(spec.mean_burst > 0, "background: mean burst must be > 0");
    require(spec.mean_idle > 0, "background: mean idle must be > 0");
    require(std::isfinite(spec.peak_rate) && spec.peak_rate >= 0,
            "background: peak rate must be >= 0");
}

inline void validate(const Scenario& sc) {
    using detail::require;
    validate(sc.topology);
    require(!sc.topology.flows.empty(), "scenario has no flows");
    require(std::isfinite(sc.dt) && sc.dt > 0, "dt must be > 0");
    const double min_rtt = sc.min_round_trip_delay();
    require(sc.dt <= min_rtt / 10.0 * (1.0 + 1e-12),
            "dt must not exceed one tenth of the smallest round-trip propagation delay ("
                + std::to_string(min_rtt / 10.0) + " s)");
    double latest = 0.0;
    for (const auto& f : sc.topology.flows) latest = std::max(latest, f.start_time);
    require(sc.duration > latest, "duration must exceed the latest flow start time");
    require(sc.output_interval > 0, "output interval must be > 0");
    if (sc.background) validate(*sc.background, sc.topology);
    if (sc.new_flow) (void)sc.fairness_target();
}

/// Dumbbell with one shared bottleneck (R1,R2) and a fast access link per
/// source. Flow k (0-based) starts at k * start_gap.
inline Topology build_single_bottleneck(int n_flows, double capacity, double access_delay,
                                        double bottleneck_delay, double alpha, double start_gap) {
    using detail::require;
    require(n_flows >= 1, "single bottleneck: need at least one flow");
    require(capacity > 0, "single bottleneck: capacity must be > 0");
    require(access_delay >= 0 && bottleneck_delay >= 0, "single bottleneck: delays must be >= 0");
    require(alpha > 0, "single bottleneck: alpha must be > 0");
    require(start_gap >= 0, "single bottleneck: start gap must be >= 0");

    Topology topo;
    topo.links.push_back({"R1-R2", capacity, bottleneck_delay, std::nullopt});
    for (int k = 1; k <= n_flows; ++k) {
        const std::string src = "S" + std::to_string(k);
        // Access links are ten times faster so only (R1,R2) ever queues.
        topo.links.push_back({src + "-R1", 10.0 * capacity, access_delay, std::nullopt});
        FlowSpec flow;
        flow.id = src;
        flow.path = {src + "-R1", "R1-R2"};
        flow.alpha = alpha;
        flow.start_time = (k - 1) * start_gap;
        topo.flows.push_back(std::move(flow));
    }
    validate(topo);
    return topo;
}

/// Chain R1 -> R2 -> ... -> Rn -> D. Source S_k enters at R_k through its own
/// access link, so S1 crosses every hop. All links share capacity and delay.
inline Topology build_parking_lot(int n_sources, double link_capacity, double link_delay,
                                  double alpha = 50.0) {
    using detail::require;
    require(n_sources >= 2, "parking lot: need at least two sources");
    require(link_capacity > 0, "parking lot: capacity must be > 0");
    require(link_delay >= 0, "parking lot: delay must be >= 0");

    Topology topo;
    auto router = [](int k) { return "R" + std::to_string(k); };
    for (int k = 1; k <= n_sources; ++k) {
        const std::string next = k == n_sources ? std::string("D") : router(k + 1);
        topo.links.push_back({router(k) + "-" + next, link_capacity, link_delay, std::nullopt});
    }
    for (int k = 1; k <= n_sources; ++k) {
        const std::string src = "S" + std::to_string(k);
        topo.links.push_back({src + "-" + router(k), link_capacity, link_delay, std::nullopt});
        FlowSpec flow;
        flow.id = src;
        flow.alpha = alpha;
        flow.path.push_back(src + "-" + router(k));
        for (int hop = k; hop <= n_sources; ++hop) {
            flow.path.push_back(topo.links[static_cast<std::size_t>(hop - 1)].id);
        }
        topo.flows.push_back(std::move(flow));
    }
    validate(topo);
    return topo;
}

/// Router chain shared by every parking-lot source; the default path for
/// background traffic entering at R1.
inline std::vector<LinkId> parking_lot_chain(int n_sources) {
    std::vector<LinkId> chain;
    for (int k = 1; k <= n_sources; ++k) {
        chain.push_back("R" + std::to_string(k) + "-"
                        + (k == n_sources ? std::string("D") : "R" + std::to_string(k + 1)));
    }
    return chain;
}

} // namespace fastfair

#endif
