// Reference computations used only by the tests. They deliberately avoid the
// library's closed forms.
#pragma once

#include <cmath>
#include <functional>

namespace oracle {

/// Root of f on [lo, hi] by bisection; f(lo) and f(hi) must differ in sign.
inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
    double flo = f(lo);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct Equilibrium {
    double b0, x0, xf;
};

/// Newcomer backlog b from the capacity constraint alone:
/// alpha C / b + n alpha C / (b + n alpha) = C, with b > 0.
inline Equilibrium equilibrium_by_bisection(int n, double capacity, double alpha) {
    auto excess = [&](double b) {
        return alpha * capacity / b + n * alpha * capacity / (b + n * alpha) - capacity;
    };
    const double b = bisect(excess, 1e-9 * alpha, 1e6 * alpha);
    return {b, alpha * capacity / b, alpha * capacity / (b + n * alpha)};
}

/// Steps a fluid queue holding `backlog` with constant inflow until empty and
/// reports the time taken, or +inf if it does not drain within `horizon`.
inline double drain_time_by_stepping(double backlog, double inflow, double capacity,
                                     double horizon, double dt = 1e-6) {
    double t = 0.0;
    while (t < horizon) {
        backlog += (inflow - capacity) * dt;
        t += dt;
        if (backlog <= 0) return t;
    }
    return INFINITY;
}

} // namespace oracle
