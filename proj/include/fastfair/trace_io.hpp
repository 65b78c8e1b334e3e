#ifndef FASTFAIR_TRACE_IO_HPP
#define FASTFAIR_TRACE_IO_HPP

#include "fastfair/analysis.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace fastfair {

namespace detail {

// CSV fields never contain quotes in practice; anything with a comma or quote
// is quoted anyway.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace detail

inline void write_flow_csv(std::ostream& out, const Trace& trace) {
    out << "t,flow_id,rate_pkts_s,window_pkts,rtt_s,dhat_s\n";
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        for (const auto& s : trace.flows) {
            if (!s.active[k]) continue;
            out << detail::fmt_g(trace.times[k]) << ',' << detail::csv_field(s.id) << ','
                << detail::fmt_g(s.rate[k]) << ',' << detail::fmt_g(s.window[k]) << ','
                << detail::fmt_g(s.rtt[k]) << ',' << detail::fmt_g(s.d_hat[k]) << '\n';
        }
    }
}

inline void write_link_csv(std::ostream& out, const Trace& trace) {
    out << "t,link_id,backlog_pkts\n";
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        for (const auto& l : trace.links) {
            out << detail::fmt_g(trace.times[k]) << ',' << detail::csv_field(l.id) << ','
                << detail::fmt_g(l.backlog[k]) << '\n';
        }
    }
}

inline void write_event_csv(std::ostream& out, const Trace& trace) {
    out << "t,flow_id,event,detail\n";
    for (const auto& e : trace.events) {
        out << detail::fmt_g(e.time) << ',' << detail::csv_field(e.flow) << ','
            << detail::csv_field(e.kind) << ',' << detail::csv_field(e.detail) << '\n';
    }
}

struct SummaryRow {
    std::string scenario;
    int n = 0; // competitors of the measured flow
    double capacity = 0.0;
    double alpha = 0.0;
    std::string estimator;
    double fairness_ratio = 0.0;
    double predicted_ratio = 0.0;
    double rr_threshold = 0.0;
    double total_backlog = 0.0;
    std::optional<double> sweep_value; // set for sweep rows
    std::string status = "ok";
};

/// Capacity of the measured flow's tightest link.
inline double bottleneck_capacity(const Scenario& sc, const FlowSpec& flow) {
    double cap = std::numeric_limits<double>::infinity();
    for (const auto& hop : flow.path) {
        if (const auto* l = sc.topology.find_link(hop)) cap = std::min(cap, l->capacity);
    }
    return cap;
}

inline SummaryRow summarize(const Scenario& sc, const Trace& trace) {
    const auto& target = sc.fairness_target();
    SummaryRow row;
    row.scenario = sc.name;
    row.n = static_cast<int>(sc.topology.flows.size()) - 1;
    row.capacity = bottleneck_capacity(sc, target);
    row.alpha = target.alpha;
    row.estimator = to_string(target.estimator.kind);
    const auto window = default_fairness_window(trace);
    row.fairness_ratio = fairness_ratio(trace, target.id, window);
    row.predicted_ratio = predict_equilibrium(row.n, row.capacity, row.alpha).unfairness_ratio;
    row.rr_threshold = row.n >= 1 ? rr_threshold(row.n, row.capacity, row.alpha) : 0.0;
    row.total_backlog = mean_total_backlog(trace, window);
    return row;
}

inline void write_summary_header(std::ostream& out, bool sweep) {
    out << "scenario,n,capacity_pkts_s,alpha_pkts,estimator,fairness_ratio,predicted_ratio,"
           "rr_threshold_s,total_backlog_pkts";
    if (sweep) out << ",sweep_value,status";
    out << '\n';
}

inline void write_summary_row(std::ostream& out, const SummaryRow& r, bool sweep) {
    auto num = [&](double v) { return r.status == "ok" ? detail::fmt_g(v) : std::string(); };
    out << detail::csv_field(r.scenario) << ',' << r.n << ',' << detail::fmt_g(r.capacity) << ','
        << detail::fmt_g(r.alpha) << ',' << r.estimator << ',' << num(r.fairness_ratio) << ','
        << detail::fmt_g(r.predicted_ratio) << ',' << detail::fmt_g(r.rr_threshold) << ','
        << num(r.total_backlog);
    if (sweep) {
        out << ',' << (r.sweep_value ? detail::fmt_g(*r.sweep_value) : std::string()) << ','
            << detail::csv_field(r.status);
    }
    out << '\n';
}

/// Writes flows.csv, links.csv, events.csv and summary.csv into dir.
inline void write_run_outputs(const std::filesystem::path& dir, const Trace& trace,
                              const SummaryRow& summary) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("flows.csv");
        write_flow_csv(out, trace);
    }
    {
        auto out = open("links.csv");
        write_link_csv(out, trace);
    }
    {
        auto out = open("events.csv");
        write_event_csv(out, trace);
    }
    auto out = open("summary.csv");
    write_summary_header(out, false);
    write_summary_row(out, summary, false);
}

} // namespace fastfair

#endif
