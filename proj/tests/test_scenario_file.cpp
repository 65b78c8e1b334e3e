#include <catch_amalgamated.hpp>

#include "fastfair/scenario_file.hpp"

#include <string>

using namespace fastfair;
using Catch::Approx;

namespace {

const std::string scenarios_dir = FASTFAIR_SCENARIOS;

int error_line(const std::string& text) {
    try {
        build_scenario(parse_document(text, "t.ini"));
    } catch (const ParseError& err) {
        return err.line();
    }
    return -1;
}

const char* minimal = R"(
[scenario]
duration_s = 30
[single_bottleneck]
n_flows = 2
capacity_mbps = 100
bottleneck_delay_s = 0.01
)";

} // namespace

TEST_CASE("minimal file", "[scenario_file]") {
    const auto sc = build_scenario(parse_document(minimal));
    REQUIRE(sc.topology.flows.size() == 2);
    REQUIRE(sc.topology.find_link("R1-R2")->capacity == 12500);
    REQUIRE(sc.duration == 30);
    // dt defaults to a twentieth of the shortest RTT
    REQUIRE(sc.dt == Approx(0.001));
    REQUIRE(sc.seed == 1);
    REQUIRE_FALSE(sc.background);
}

TEST_CASE("comments and whitespace", "[scenario_file]") {
    const auto doc = parse_document("# top\n\n  [scenario]   # trailing\n  duration_s=  40 \n");
    REQUIRE(doc.sections.size() == 1);
    REQUIRE(doc.find("scenario")->find("duration_s")->value == "40");
}

TEST_CASE("parse errors carry line numbers", "[scenario_file]") {
    REQUIRE(error_line("[scenario]\nduration_s = 30\nbogus = 1\n") == 3);
    REQUIRE(error_line("[scenario]\n[nonsense]\n") == 2);
    REQUIRE(error_line("[scenario]\nduration_s = 30\nduration_s = 31\n") == 3);
    REQUIRE(error_line("[scenario]\nduration_s 30\n") == 2);
    REQUIRE(error_line("duration_s = 30\n") == 1);
    REQUIRE(error_line("[scenario]\n\n[link]\n") == 3);
    REQUIRE(error_line("[scenario\n") == 1);
    REQUIRE(error_line("[scenario]\n[scenario]\n") == 2);
    REQUIRE(error_line("[scenario main]\n") == 1);

    try {
        parse_document("[scenario]\nbogus = 1\n", "file.ini");
        FAIL("expected a parse error");
    } catch (const ParseError& err) {
        REQUIRE(std::string(err.what()).rfind("file.ini:2:", 0) == 0);
    }
}

TEST_CASE("bad values are rejected", "[scenario_file]") {
    const std::string head = "[scenario]\nduration_s = 30\n[single_bottleneck]\ncapacity_mbps = 100\n"
                             "bottleneck_delay_s = 0.01\n";
    REQUIRE(error_line(head + "n_flows = two\n") == 6);
    REQUIRE(error_line(head + "n_flows = 0\n") == 3);
    REQUIRE(error_line(head + "n_flows = 2\nestimator = reno\n") == 7);
    REQUIRE(error_line(head + "n_flows = 2\nalpha_pkts = -3\n") > 0);
    REQUIRE(error_line(head + "n_flows = 2\n[parking_lot]\nn_sources = 2\n") == 7);
    // dt above a tenth of the RTT
    REQUIRE(error_line("[scenario]\nduration_s = 30\ndt_s = 0.01\n"
                       "[single_bottleneck]\nn_flows = 1\ncapacity_mbps = 1\nbottleneck_delay_s = 0.01\n")
            > 0);
    REQUIRE(error_line("[scenario]\nduration_s = 30\n[arrival]\nstart_s = 1\n") == 3);
}

TEST_CASE("explicit links and flows", "[scenario_file]") {
    const auto sc = build_scenario(parse_document(R"(
[scenario]
duration_s = 20
dt_s = 0.0005
[link A]
capacity_pkts_per_s = 1000
delay_s = 0.01
buffer_limit_pkts = 200
[link B]
capacity_mbps = 8
delay_s = 0.002
[flow x]
path = A, B
alpha_pkts = 20
gain = vegas
estimator = rate_reduction
[flow y]
path = B
start_s = 5
reverse_delay_s = 0.03
)"));
    REQUIRE(sc.topology.links.size() == 2);
    REQUIRE(sc.topology.find_link("A")->buffer_limit == 200);
    REQUIRE(sc.topology.find_link("B")->capacity == 1000);
    const auto& x = *sc.topology.find_flow("x");
    REQUIRE(x.path == std::vector<LinkId>{"A", "B"});
    REQUIRE(x.gain == GainKind::Vegas);
    REQUIRE(x.estimator.kind == EstimatorKind::RateReduction);
    REQUIRE(x.alpha == 20);
    const auto& y = *sc.topology.find_flow("y");
    REQUIRE(y.reverse_delay == 0.03);
    REQUIRE(sc.fairness_target().id == "y");
    REQUIRE(sc.dt == 0.0005);
}

TEST_CASE("arrival in a single bottleneck", "[scenario_file]") {
    const auto sc = build_scenario(parse_document(std::string(minimal)
                                                  + "[arrival]\nstart_s = 12\nestimator = delta_probe\n"
                                                    "theta = -0.25\n"));
    REQUIRE(sc.topology.flows.size() == 3);
    REQUIRE(sc.new_flow == "S0");
    const auto& s0 = *sc.topology.find_flow("S0");
    REQUIRE(s0.start_time == 12);
    REQUIRE(s0.estimator.kind == EstimatorKind::DeltaProbe);
    REQUIRE(s0.estimator.theta == -0.25);
    REQUIRE(s0.path.back() == "R1-R2");
    REQUIRE(sc.topology.round_trip_delay(s0) == Approx(0.02));
    REQUIRE(sc.topology.find_flow("S1")->estimator.kind == EstimatorKind::NaiveMin);
}

TEST_CASE("bundled scenarios load", "[scenario_file]") {
    SECTION("single bottleneck") {
        const auto sc = build_scenario(load_document(scenarios_dir + "/staggered_starts.ini"));
        REQUIRE(sc.topology.flows.size() == 5);
        REQUIRE(sc.dt == Approx(0.001));
        REQUIRE(sc.duration == 150);
    }
    SECTION("background sweep") {
        const auto doc = load_document(scenarios_dir + "/background_sweep.ini");
        const auto sc = build_scenario(doc);
        REQUIRE(sc.new_flow == "S1");
        REQUIRE(sc.topology.find_flow("S1")->start_time == 80);
        REQUIRE(sc.background);
        REQUIRE(sc.background->path == parking_lot_chain(5));
        REQUIRE(sc.background->peak_rate == Approx(625));
        REQUIRE(sc.seed == 7);
        const auto spec = parse_sweep(doc);
        REQUIRE(spec.kind == SweepKind::BackgroundSweep);
        REQUIRE(spec.values == std::vector<double>{5, 20, 50});
        REQUIRE(spec.estimators
                == std::vector<EstimatorKind>{EstimatorKind::NaiveMin, EstimatorKind::DeltaProbe});
        const auto point = build_scenario(apply_sweep_point(spec, 20, EstimatorKind::DeltaProbe));
        REQUIRE(point.background->peak_rate == Approx(2500));
        REQUIRE(point.topology.find_flow("S1")->estimator.kind == EstimatorKind::DeltaProbe);
        REQUIRE(point.topology.find_flow("S2")->estimator.kind == EstimatorKind::NaiveMin);
    }
    SECTION("rtt sweep") {
        const auto spec = parse_sweep(load_document(scenarios_dir + "/rtt_sweep.ini"));
        REQUIRE(spec.kind == SweepKind::RttSweep);
        REQUIRE(spec.values.size() == 10);
        REQUIRE(spec.estimators.size() == 3);
        for (double v : spec.values) {
            const auto sc = build_scenario(apply_sweep_point(spec, v, EstimatorKind::RateReduction));
            REQUIRE(sc.topology.flows.size() == 9);
            for (const auto& f : sc.topology.flows) {
                REQUIRE(sc.topology.round_trip_delay(f) == Approx(v).epsilon(1e-12));
            }
            REQUIRE(sc.dt == Approx(v / 20));
        }
    }
    SECTION("flow count sweep") {
        const auto spec = parse_sweep(load_document(scenarios_dir + "/nflows_sweep.ini"));
        REQUIRE(spec.kind == SweepKind::NflowsSweep);
        for (double v : spec.values) {
            const auto sc = build_scenario(apply_sweep_point(spec, v, EstimatorKind::NaiveMin));
            REQUIRE(sc.topology.flows.size() == static_cast<std::size_t>(v) + 1);
        }
    }
}

TEST_CASE("sweep rules", "[scenario_file]") {
    const std::string base = std::string(minimal) + "[arrival]\nstart_s = 10\n";
    REQUIRE_THROWS_AS(parse_sweep(parse_document(base)), ParseError);
    REQUIRE_THROWS_AS(parse_sweep(parse_document(base + "[sweep]\nkind = rtt_sweep\nvalues = 0.1, 0.1\n")),
                      ParseError);
    REQUIRE_THROWS_AS(parse_sweep(parse_document(base + "[sweep]\nkind = rtt_sweep\nvalues = 0.2, 0.1\n")),
                      ParseError);
    REQUIRE_THROWS_AS(parse_sweep(parse_document(base + "[sweep]\nkind = rtt_sweep\nvalues = 0.1, x\n")),
                      ParseError);
    REQUIRE_THROWS_AS(parse_sweep(parse_document(base + "[sweep]\nkind = spiral\nvalues = 1\n")),
                      ParseError);
    REQUIRE_THROWS_AS(
        parse_sweep(parse_document(base + "[sweep]\nkind = rtt_sweep\nvalues = 1\nworkers = 0\n")),
        ParseError);
    REQUIRE_THROWS_AS(parse_sweep(parse_document(std::string(minimal) + "[sweep]\nkind = rtt_sweep\nvalues = 1\n")),
                      ParseError);

    const auto spec = parse_sweep(parse_document(base + "[sweep]\nkind = single_run\n"));
    REQUIRE(spec.values == std::vector<double>{0.0});
    REQUIRE(spec.estimators.size() == 3);
    REQUIRE(spec.workers == 1);

    // access delay larger than half the swept RTT
    const auto rtt = parse_sweep(parse_document(
        "[scenario]\nduration_s = 30\n[single_bottleneck]\nn_flows = 2\ncapacity_mbps = 100\n"
        "access_delay_s = 0.02\nbottleneck_delay_s = 0.01\n[arrival]\nstart_s = 10\n"
        "[sweep]\nkind = rtt_sweep\nvalues = 0.02, 0.1\n"));
    REQUIRE_THROWS_AS(apply_sweep_point(rtt, 0.02, EstimatorKind::NaiveMin), ValidationError);
    REQUIRE_NOTHROW(apply_sweep_point(rtt, 0.1, EstimatorKind::NaiveMin));
}
