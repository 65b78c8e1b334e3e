#ifndef FASTFAIR_SCENARIO_FILE_HPP
#define FASTFAIR_SCENARIO_FILE_HPP

// Reader for the flat `key = value` scenario format described in
// docs/scenario_format.md.

#include "fastfair/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fastfair {

class ParseError : public ValidationError {
public:
    ParseError(const std::string& source, int line, const std::string& what)
        : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

struct Entry {
    std::string key;
    std::string value;
    int line = 0;
};

struct Section {
    std::string kind; // e.g. "link"
    std::string name; // e.g. "R1-R2"; empty for singleton sections
    int line = 0;
    std::vector<Entry> entries;

    const Entry* find(const std::string& key) const {
        for (const auto& e : entries) {
            if (e.key == key) return &e;
        }
        return nullptr;
    }
    void set(const std::string& key, const std::string& value) {
        for (auto& e : entries) {
            if (e.key == key) {
                e.value = value;
                return;
            }
        }
        entries.push_back({key, value, 0});
    }
};

struct Document {
    std::string source = "<memory>";
    std::vector<Section> sections;

    const Section* find(const std::string& kind, const std::string& name = "") const {
        for (const auto& s : sections) {
            if (s.kind == kind && s.name == name) return &s;
        }
        return nullptr;
    }
    Section* find(const std::string& kind, const std::string& name = "") {
        for (auto& s : sections) {
            if (s.kind == kind && s.name == name) return &s;
        }
        return nullptr;
    }
    Section& get_or_add(const std::string& kind) {
        if (auto* s = find(kind)) return *s;
        sections.push_back({kind, "", 0, {}});
        return sections.back();
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

inline const std::set<std::string>& known_keys(const std::string& kind) {
    static const std::set<std::string> estimator = {
        "estimator", "theta", "t_eps_s", "pause_s", "max_retries", "stable_tolerance",
        "stable_window_rtts"};
    static const std::map<std::string, std::set<std::string>> table = [] {
        std::map<std::string, std::set<std::string>> t;
        t["scenario"] = {"name", "duration_s", "dt_s", "seed", "output_interval_s", "new_flow"};
        t["link"] = {"capacity_pkts_per_s", "capacity_mbps", "delay_s", "buffer_limit_pkts"};
        t["flow"] = {"path", "alpha_pkts", "gamma", "start_s", "reverse_delay_s", "gain"};
        t["single_bottleneck"] = {"n_flows", "capacity_pkts_per_s", "capacity_mbps",
                                  "access_delay_s", "bottleneck_delay_s", "alpha_pkts", "gamma",
                                  "start_gap_s", "buffer_limit_pkts"};
        t["parking_lot"] = {"n_sources", "capacity_pkts_per_s", "capacity_mbps", "link_delay_s",
                            "alpha_pkts", "gamma"};
        t["arrival"] = {"start_s", "alpha_pkts", "gamma"};
        t["background"] = {"path", "shape", "mean_burst_s", "mean_idle_s", "peak_rate_mbps",
                           "peak_rate_pkts_per_s"};
        t["sweep"] = {"kind", "values", "estimators", "workers"};
        for (auto k : {"flow", "single_bottleneck", "parking_lot", "arrival"}) {
            t[k].insert(estimator.begin(), estimator.end());
        }
        return t;
    }();
    static const std::set<std::string> none;
    auto it = table.find(kind);
    return it == table.end() ? none : it->second;
}

inline bool named_section(const std::string& kind) { return kind == "link" || kind == "flow"; }

} // namespace detail

inline Document parse_document(std::string_view text, const std::string& source = "<memory>") {
    Document doc;
    doc.source = source;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    Section* current = nullptr;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
            const std::string header = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            const auto space = header.find_first_of(" \t");
            Section sec;
            sec.kind = header.substr(0, space);
            sec.name = space == std::string::npos ? "" : detail::trim(header.substr(space));
            sec.line = line_no;
            if (detail::known_keys(sec.kind).empty()) {
                throw ParseError(source, line_no, "unknown section [" + sec.kind + "]");
            }
            if (detail::named_section(sec.kind) == sec.name.empty()) {
                throw ParseError(source, line_no,
                                 detail::named_section(sec.kind)
                                     ? "section [" + sec.kind + "] needs a name"
                                     : "section [" + sec.kind + "] takes no name");
            }
            if (doc.find(sec.kind, sec.name)) {
                throw ParseError(source, line_no, "duplicate section [" + header + "]");
            }
            doc.sections.push_back(std::move(sec));
            current = &doc.sections.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
        if (!current) throw ParseError(source, line_no, "entry outside of any section");
        Entry e{detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), line_no};
        if (e.key.empty()) throw ParseError(source, line_no, "empty key");
        if (detail::known_keys(current->kind).count(e.key) == 0) {
            throw ParseError(source, line_no,
                             "unknown key '" + e.key + "' in [" + current->kind + "]");
        }
        if (current->find(e.key)) throw ParseError(source, line_no, "duplicate key '" + e.key + "'");
        current->entries.push_back(std::move(e));
    }
    return doc;
}

inline Document load_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_document(ss.str(), path);
}

namespace detail {

class Reader {
public:
    Reader(const Document& doc, const Section& sec) : doc_(doc), sec_(sec) {}

    bool has(const std::string& key) const { return sec_.find(key) != nullptr; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        const auto* e = sec_.find(key);
        throw ParseError(doc_.source, e ? e->line : sec_.line, what);
    }

    std::string str(const std::string& key) const {
        const auto* e = sec_.find(key);
        if (!e) throw ParseError(doc_.source, sec_.line,
                                 "[" + sec_.kind + "] is missing '" + key + "'");
        return e->value;
    }
    std::string str(const std::string& key, const std::string& fallback) const {
        return has(key) ? str(key) : fallback;
    }

    double num(const std::string& key) const {
        const std::string v = str(key);
        if (v == "inf") return std::numeric_limits<double>::infinity();
        double out = 0.0;
        const auto* end = v.data() + v.size();
        auto [ptr, ec] = std::from_chars(v.data(), end, out);
        if (ec != std::errc() || ptr != end || std::isnan(out)) {
            fail(key, "'" + key + "' expects a number, got '" + v + "'");
        }
        return out;
    }
    double num(const std::string& key, double fallback) const {
        return has(key) ? num(key) : fallback;
    }
    std::optional<double> opt_num(const std::string& key) const {
        if (!has(key) || str(key) == "auto") return std::nullopt;
        return num(key);
    }

    long long integer(const std::string& key) const {
        const std::string v = str(key);
        long long out = 0;
        const auto* end = v.data() + v.size();
        auto [ptr, ec] = std::from_chars(v.data(), end, out);
        if (ec != std::errc() || ptr != end) {
            fail(key, "'" + key + "' expects an integer, got '" + v + "'");
        }
        return out;
    }
    long long integer(const std::string& key, long long fallback) const {
        return has(key) ? integer(key) : fallback;
    }

    /// Capacity from either packets/s or Mb/s.
    std::optional<double> rate(const std::string& stem_pkts, const std::string& stem_mbps) const {
        if (has(stem_pkts) && has(stem_mbps)) {
            fail(stem_mbps, "give either '" + stem_pkts + "' or '" + stem_mbps + "', not both");
        }
        if (has(stem_pkts)) return num(stem_pkts);
        if (has(stem_mbps)) return mbps_to_pkts(num(stem_mbps));
        return std::nullopt;
    }

    void estimator(EstimatorConfig& cfg) const {
        try {
            if (has("estimator")) cfg.kind = parse_estimator_kind(str("estimator"));
        } catch (const ValidationError& err) {
            fail("estimator", err.what());
        }
        cfg.theta = num("theta", cfg.theta);
        if (has("t_eps_s")) cfg.t_eps = opt_num("t_eps_s");
        if (has("pause_s")) cfg.pause_duration = opt_num("pause_s");
        cfg.max_retries = static_cast<int>(integer("max_retries", cfg.max_retries));
        cfg.stable_tolerance = num("stable_tolerance", cfg.stable_tolerance);
        cfg.stable_window_rtts = num("stable_window_rtts", cfg.stable_window_rtts);
    }

    void flow_common(FlowSpec& flow) const {
        flow.alpha = num("alpha_pkts", flow.alpha);
        flow.gamma = num("gamma", flow.gamma);
        estimator(flow.estimator);
    }

private:
    const Document& doc_;
    const Section& sec_;
};

} // namespace detail

/// Builds and validates a scenario from a parsed document.
inline Scenario build_scenario(const Document& doc) {
    using detail::Reader;
    Scenario sc;
    const Section* head = doc.find("scenario");
    if (!head) throw ParseError(doc.source, 1, "missing [scenario] section");
    const Reader scen(doc, *head);

    const Section* sb = doc.find("single_bottleneck");
    const Section* pl = doc.find("parking_lot");
    if (sb && pl) {
        throw ParseError(doc.source, pl->line,
                         "[single_bottleneck] and [parking_lot] are mutually exclusive");
    }
    const Section* arrival = doc.find("arrival");
    const Section* background = doc.find("background");
    std::vector<LinkId> default_bg_path;

    if (sb) {
        const Reader r(doc, *sb);
        const auto cap = r.rate("capacity_pkts_per_s", "capacity_mbps");
        if (!cap) r.fail("capacity_mbps", "[single_bottleneck] needs a capacity");
        const auto n = r.integer("n_flows");
        const double gap = r.num("start_gap_s", 0.0);
        try {
            sc.topology = build_single_bottleneck(static_cast<int>(n), *cap,
                                                  r.num("access_delay_s", 0.0),
                                                  r.num("bottleneck_delay_s"),
                                                  r.num("alpha_pkts", 50.0), gap);
        } catch (const ValidationError& err) {
            throw ParseError(doc.source, sb->line, err.what());
        }
        if (r.has("buffer_limit_pkts")) {
            const double limit = r.num("buffer_limit_pkts");
            if (std::isfinite(limit)) sc.topology.links.front().buffer_limit = limit;
        }
        for (auto& f : sc.topology.flows) r.flow_common(f);
        if (arrival) {
            const Reader a(doc, *arrival);
            const double access = r.num("access_delay_s", 0.0);
            sc.topology.links.push_back({"S0-R1", 10.0 * *cap, access, std::nullopt});
            FlowSpec f = sc.topology.flows.front();
            f.id = "S0";
            f.path = {"S0-R1", "R1-R2"};
            f.start_time = a.num("start_s");
            a.flow_common(f);
            sc.topology.flows.push_back(std::move(f));
            sc.new_flow = "S0";
        }
        default_bg_path = {"R1-R2"};
    } else if (pl) {
        const Reader r(doc, *pl);
        const auto cap = r.rate("capacity_pkts_per_s", "capacity_mbps");
        if (!cap) r.fail("capacity_mbps", "[parking_lot] needs a capacity");
        const auto n = r.integer("n_sources");
        try {
            sc.topology = build_parking_lot(static_cast<int>(n), *cap, r.num("link_delay_s"),
                                            r.num("alpha_pkts", 50.0));
        } catch (const ValidationError& err) {
            throw ParseError(doc.source, pl->line, err.what());
        }
        for (auto& f : sc.topology.flows) r.flow_common(f);
        if (arrival) {
            const Reader a(doc, *arrival);
            auto& s1 = sc.topology.flows.front();
            s1.start_time = a.num("start_s");
            a.flow_common(s1);
            sc.new_flow = s1.id;
        }
        default_bg_path = parking_lot_chain(static_cast<int>(n));
    } else if (arrival) {
        throw ParseError(doc.source, arrival->line,
                         "[arrival] needs a [single_bottleneck] or [parking_lot] section");
    }

    for (const auto& sec : doc.sections) {
        if (sec.kind != "link") continue;
        const Reader r(doc, sec);
        LinkSpec* link = nullptr;
        for (auto& l : sc.topology.links) {
            if (l.id == sec.name) link = &l;
        }
        if (!link) {
            sc.topology.links.push_back({sec.name, 0.0, 0.0, std::nullopt});
            link = &sc.topology.links.back();
        }
        if (auto cap = r.rate("capacity_pkts_per_s", "capacity_mbps")) link->capacity = *cap;
        link->prop_delay = r.num("delay_s", link->prop_delay);
        if (r.has("buffer_limit_pkts")) {
            const double limit = r.num("buffer_limit_pkts");
            link->buffer_limit = std::isfinite(limit) ? std::optional<double>(limit) : std::nullopt;
        }
    }
    for (const auto& sec : doc.sections) {
        if (sec.kind != "flow") continue;
        const Reader r(doc, sec);
        FlowSpec* flow = sc.topology.find_flow(sec.name);
        if (!flow) {
            sc.topology.flows.emplace_back().id = sec.name;
            flow = &sc.topology.flows.back();
            if (!r.has("path")) r.fail("path", "[flow " + sec.name + "] needs a path");
        }
        if (r.has("path")) flow->path = detail::split_list(r.str("path"));
        flow->start_time = r.num("start_s", flow->start_time);
        if (r.has("reverse_delay_s")) flow->reverse_delay = r.opt_num("reverse_delay_s");
        if (r.has("gain")) {
            const auto g = r.str("gain");
            if (g == "fast") {
                flow->gain = GainKind::Fast;
            } else if (g == "vegas") {
                flow->gain = GainKind::Vegas;
            } else {
                r.fail("gain", "gain must be 'fast' or 'vegas'");
            }
        }
        r.flow_common(*flow);
    }

    if (background) {
        const Reader r(doc, *background);
        ParetoSourceSpec bg;
        bg.path = r.has("path") ? detail::split_list(r.str("path")) : default_bg_path;
        bg.shape = r.num("shape", bg.shape);
        bg.mean_burst = r.num("mean_burst_s", bg.mean_burst);
        bg.mean_idle = r.num("mean_idle_s", bg.mean_idle);
        bg.peak_rate = r.rate("peak_rate_pkts_per_s", "peak_rate_mbps").value_or(0.0);
        sc.background = std::move(bg);
    }

    sc.name = scen.str("name", sc.name);
    sc.duration = scen.num("duration_s");
    sc.seed = static_cast<std::uint64_t>(scen.integer("seed", 1));
    sc.output_interval = scen.num("output_interval_s", sc.output_interval);
    if (scen.has("new_flow")) sc.new_flow = scen.str("new_flow");
    const std::string dt = scen.str("dt_s", "auto");
    sc.dt = dt == "auto" ? 0.0 : scen.num("dt_s");
    if (sc.dt == 0.0 && !sc.topology.flows.empty()) {
        try {
            validate(sc.topology);
        } catch (const ValidationError& err) {
            throw ParseError(doc.source, head->line, err.what());
        }
        sc.dt = sc.min_round_trip_delay() / 20.0;
    }

    try {
        validate(sc);
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& err) {
        throw ParseError(doc.source, head->line, err.what());
    }
    return sc;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepKind { RttSweep, NflowsSweep, BackgroundSweep, SingleRun };

inline const char* to_string(SweepKind k) {
    switch (k) {
    case SweepKind::RttSweep: return "rtt_sweep";
    case SweepKind::NflowsSweep: return "nflows_sweep";
    case SweepKind::BackgroundSweep: return "background_sweep";
    case SweepKind::SingleRun: return "single_run";
    }
    return "?";
}

struct SweepSpec {
    SweepKind kind = SweepKind::SingleRun;
    Document base;
    std::vector<double> values;
    std::vector<EstimatorKind> estimators;
    int workers = 1;
};

inline SweepSpec parse_sweep(const Document& doc) {
    const Section* sec = doc.find("sweep");
    if (!sec) throw ParseError(doc.source, 1, "missing [sweep] section");
    const detail::Reader r(doc, *sec);
    SweepSpec spec;
    spec.base = doc;
    const std::string kind = r.str("kind");
    if (kind == "rtt_sweep") {
        spec.kind = SweepKind::RttSweep;
    } else if (kind == "nflows_sweep") {
        spec.kind = SweepKind::NflowsSweep;
    } else if (kind == "background_sweep") {
        spec.kind = SweepKind::BackgroundSweep;
    } else if (kind == "single_run") {
        spec.kind = SweepKind::SingleRun;
    } else {
        r.fail("kind", "unknown sweep kind '" + kind + "'");
    }

    if (spec.kind == SweepKind::SingleRun && !r.has("values")) {
        spec.values = {0.0};
    } else {
        for (const auto& v : detail::split_list(r.str("values"))) {
            double x = 0.0;
            auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc() || ptr != v.data() + v.size()) {
                r.fail("values", "sweep value '" + v + "' is not a number");
            }
            spec.values.push_back(x);
        }
    }
    if (spec.values.empty()) r.fail("values", "sweep values must not be empty");
    for (std::size_t i = 1; i < spec.values.size(); ++i) {
        if (!(spec.values[i] > spec.values[i - 1])) {
            r.fail("values", "sweep values must be strictly increasing");
        }
    }

    if (r.has("estimators")) {
        for (const auto& name : detail::split_list(r.str("estimators"))) {
            try {
                spec.estimators.push_back(parse_estimator_kind(name));
            } catch (const ValidationError& err) {
                r.fail("estimators", err.what());
            }
        }
    }
    if (spec.estimators.empty()) {
        spec.estimators = {EstimatorKind::NaiveMin, EstimatorKind::RateReduction,
                           EstimatorKind::DeltaProbe};
    }
    spec.workers = static_cast<int>(r.integer("workers", 1));
    if (spec.workers < 1) r.fail("workers", "workers must be >= 1");

    const bool sb = doc.find("single_bottleneck") != nullptr;
    const bool pl = doc.find("parking_lot") != nullptr;
    if (!doc.find("arrival")) {
        throw ParseError(doc.source, sec->line, "sweeps need an [arrival] section");
    }
    if (spec.kind == SweepKind::RttSweep && !sb) {
        r.fail("kind", "rtt_sweep needs a [single_bottleneck] base scenario");
    }
    if (spec.kind == SweepKind::NflowsSweep && !sb && !pl) {
        r.fail("kind", "nflows_sweep needs a generated topology");
    }
    return spec;
}

namespace detail {
inline std::string num_str(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace detail

/// The base document with one swept value and the newcomer's estimator
/// substituted.
inline Document apply_sweep_point(const SweepSpec& spec, double value, EstimatorKind estimator) {
    Document doc = spec.base;
    doc.find("arrival")->set("estimator", to_string(estimator));
    switch (spec.kind) {
    case SweepKind::RttSweep: {
        // value is the round-trip propagation delay of every flow
        auto* sb = doc.find("single_bottleneck");
        double access = 0.0;
        if (const auto* e = sb->find("access_delay_s")) access = std::stod(e->value);
        const double bottleneck = value / 2.0 - access;
        if (bottleneck < 0) {
            throw ValidationError("round-trip delay " + detail::num_str(value)
                                  + " s is shorter than the access links allow");
        }
        sb->set("bottleneck_delay_s", detail::num_str(bottleneck));
        break;
    }
    case SweepKind::NflowsSweep: {
        if (auto* sb = doc.find("single_bottleneck")) {
            sb->set("n_flows", std::to_string(std::llround(value)));
        } else {
            doc.find("parking_lot")->set("n_sources", std::to_string(std::llround(value) + 1));
        }
        break;
    }
    case SweepKind::BackgroundSweep: {
        auto& bg = doc.get_or_add("background");
        bg.entries.erase(std::remove_if(bg.entries.begin(), bg.entries.end(),
                                        [](const Entry& e) {
                                            return e.key == "peak_rate_pkts_per_s";
                                        }),
                         bg.entries.end());
        bg.set("peak_rate_mbps", detail::num_str(value));
        break;
    }
    case SweepKind::SingleRun:
        break;
    }
    return doc;
}

} // namespace fastfair

#endif
