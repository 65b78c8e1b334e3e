#include <catch_amalgamated.hpp>

#include "fastfair/analysis.hpp"
#include "oracles.hpp"

#include <random>

using namespace fastfair;
using Catch::Approx;

TEST_CASE("equilibrium matches the capacity constraint", "[analysis]") {
    for (int n = 1; n <= 100; ++n) {
        for (double C : {100.0, 12500.0, 1e6}) {
            for (double alpha : {1.0, 50.0, 300.0}) {
                const auto eq = oracle::equilibrium_by_bisection(n, C, alpha);
                const auto p = predict_equilibrium(n, C, alpha);
                REQUIRE(p.b0_star == Approx(eq.b0).epsilon(1e-9));
                REQUIRE(p.x0_star == Approx(eq.x0).epsilon(1e-9));
                REQUIRE(p.xf_star == Approx(eq.xf).epsilon(1e-9));
                REQUIRE(p.unfairness_ratio == Approx(eq.x0 / eq.xf).epsilon(1e-9));
                REQUIRE(p.unfairness_ratio == Approx((1 + std::sqrt(1.0 + 4 * n)) / 2).epsilon(1e-12));
                REQUIRE(p.total_backlog == Approx(eq.b0 + n * alpha).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("n = 8 reference row", "[analysis]") {
    const auto p = predict_equilibrium(8, 12500, 50);
    // reference values rounded to about five significant figures
    REQUIRE(p.b0_star == Approx(168.6226).epsilon(1e-4));
    REQUIRE(p.x0_star == Approx(3706.51).epsilon(1e-4));
    REQUIRE(p.xf_star == Approx(1099.19).epsilon(1e-4));
    REQUIRE(p.unfairness_ratio == Approx(3.37228).epsilon(1e-5));
    REQUIRE(p.x0_star + 8 * p.xf_star == Approx(12500).epsilon(1e-12));
    const double threshold = rr_threshold(8, 12500, 50);
    REQUIRE(threshold == Approx(0.10792).epsilon(1e-4));
    REQUIRE(std::round(threshold * 1000) == 108); // ms, three significant figures
}

TEST_CASE("no competitors", "[analysis]") {
    const auto p = predict_equilibrium(0, 1000, 20);
    REQUIRE(p.b0_star == 20);
    REQUIRE(p.x0_star == 1000);
    REQUIRE(p.unfairness_ratio == 1);
    REQUIRE_THROWS(predict_equilibrium(-1, 1000, 20));
    REQUIRE_THROWS(predict_equilibrium(1, 0, 20));
    REQUIRE_THROWS(rr_threshold(0, 1000, 20));
}

TEST_CASE("equilibrium invariants", "[analysis][property]") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> n_dist(0, 1000);
    std::uniform_real_distribution<double> cap(1, 1e7), alpha(0.1, 1000);
    for (int i = 0; i < 20000; ++i) {
        const int n = n_dist(rng);
        const double C = cap(rng), a = alpha(rng);
        const auto p = predict_equilibrium(n, C, a);
        REQUIRE(p.x0_star + n * p.xf_star == Approx(C).epsilon(1e-9));
        REQUIRE(p.unfairness_ratio >= 1);
        // depends on n only
        REQUIRE(p.unfairness_ratio == Approx(predict_equilibrium(n, 1, 1).unfairness_ratio).epsilon(1e-12));
    }
}

TEST_CASE("unfairness grows like sqrt n", "[analysis]") {
    double previous = 1;
    for (int n = 1; n <= 2000; ++n) {
        const double r = predict_equilibrium(n, 12500, 50).unfairness_ratio;
        REQUIRE(r > previous);
        previous = r;
    }
    const double big = 1e12;
    const double z = (1 + std::sqrt(1 + 4 * big)) / 2;
    REQUIRE(z / std::sqrt(big) == Approx(1).epsilon(1e-6));
}

TEST_CASE("rate-reduction threshold", "[analysis]") {
    REQUIRE(rr_threshold(1, 1000, 20) == Approx(20 * (1 + std::sqrt(5.0)) / (2 * 1000)));
    // threshold(4n) / threshold(n) tends to 8
    const double ratio = rr_threshold(4'000'000, 12500, 50) / rr_threshold(1'000'000, 12500, 50);
    REQUIRE(ratio == Approx(8).epsilon(1e-3));
}

TEST_CASE("drain feasibility by direct stepping", "[analysis]") {
    const int n = 8;
    const double C = 12500, alpha = 50;
    const auto eq = oracle::equilibrium_by_bisection(n, C, alpha);
    const double backlog = eq.b0 + n * alpha;
    for (double d : {0.02, 0.05, 0.08, 0.1, 0.12, 0.15, 0.3}) {
        // the older flows keep sending x_f* for one RTT of theirs while the newcomer pauses
        const double rtt = d + backlog / C;
        const double drained = oracle::drain_time_by_stepping(backlog, n * eq.xf, C, 10.0);
        REQUIRE(rr_drain_feasible(n, C, alpha, d) == (drained < rtt));
    }
    REQUIRE(rr_drain_feasible(8, 12500, 50, 0.15));
    REQUIRE_FALSE(rr_drain_feasible(8, 12500, 50, 0.05));
    REQUIRE_FALSE(rr_drain_feasible(8, 12500, 50, rr_threshold(8, 12500, 50)));
}

TEST_CASE("drain condition agrees with the threshold", "[analysis][property]") {
    std::mt19937_64 rng(22);
    std::uniform_int_distribution<int> n_dist(1, 1000);
    std::uniform_real_distribution<double> cap(10, 1e6), alpha(1, 500), scale(0, 3);
    for (int i = 0; i < 50000; ++i) {
        const int n = n_dist(rng);
        const double C = cap(rng), a = alpha(rng);
        const double threshold = rr_threshold(n, C, a);
        const double d = threshold * scale(rng);
        if (std::abs(d - threshold) < 1e-9 * threshold) continue; // rounding tie
        REQUIRE(rr_drain_feasible(n, C, a, d) == (d > threshold));
    }
}

namespace {

Trace flat_trace(std::vector<double> rates, double duration = 10, double dt = 0.1) {
    Trace tr;
    tr.duration = duration;
    for (double t = 0; t < duration - 1e-9; t += dt) tr.times.push_back(t);
    for (std::size_t i = 0; i < rates.size(); ++i) {
        FlowSeries s;
        s.id = "F" + std::to_string(i);
        s.rate.assign(tr.times.size(), rates[i]);
        s.window = s.rtt = s.d_hat = s.rate;
        s.active.assign(tr.times.size(), 1);
        tr.flows.push_back(std::move(s));
    }
    LinkSeries l;
    l.id = "L";
    l.backlog.assign(tr.times.size(), 42.0);
    tr.links.push_back(std::move(l));
    return tr;
}

} // namespace

TEST_CASE("fairness ratio", "[analysis]") {
    SECTION("identical rates are fair") {
        const auto tr = flat_trace({500, 500, 500});
        REQUIRE(fairness_ratio(tr, "F0", {0, 10}) == Approx(1));
    }
    SECTION("newcomer at the unfair equilibrium") {
        const auto p = predict_equilibrium(8, 12500, 50);
        std::vector<double> rates(9, p.xf_star);
        rates[0] = p.x0_star;
        REQUIRE(fairness_ratio(flat_trace(rates), "F0") == Approx(3.37228).epsilon(1e-5));
    }
    SECTION("only the window counts") {
        auto tr = flat_trace({1000, 500});
        for (std::size_t k = 0; k < tr.times.size() / 2; ++k) tr.flows[0].rate[k] = 5000;
        REQUIRE(fairness_ratio(tr, "F0", {6, 10}) == Approx(2));
    }
    SECTION("errors") {
        auto tr = flat_trace({100, 100});
        REQUIRE_THROWS(fairness_ratio(tr, "F0", {20, 30}));
        REQUIRE_THROWS(fairness_ratio(tr, "nobody", {0, 10}));
        tr.flows[1].active[50] = 0;
        REQUIRE_THROWS(fairness_ratio(tr, "F0", {0, 10}));
    }
    SECTION("single flow") { REQUIRE(fairness_ratio(flat_trace({100}), "F0") == 1); }
}

TEST_CASE("default window skips estimator activity", "[analysis]") {
    auto tr = flat_trace({1, 1}, 100);
    REQUIRE(default_fairness_window(tr).begin == Approx(80));
    tr.events.push_back({85, "F0", "correction", ""});
    tr.events.push_back({90, "-", "drop", "link=L"});
    const auto w = default_fairness_window(tr);
    REQUIRE(w.begin == Approx(85));
    REQUIRE(w.end == Approx(100));
    REQUIRE(mean_total_backlog(tr, w) == Approx(42));
}
