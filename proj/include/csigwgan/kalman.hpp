#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace csigwgan {

// Scalar linear-Gaussian system
//   dX = a(t) X dt + sqrt(q) dV,   dY = c X dt + sqrt(r) dW,   X_0 ~ N(m0, P0).
struct LinearSystem {
    std::function<double(double)> a = [](double) { return 0.0; };
    // Optional closed form of int_s^t a(u) du; enables the exact predictor mean.
    std::function<double(double, double)> a_integral;
    double c = 1.0;
    double q = 1.0;
    double r = 1.0;
    double m0 = 0.0;
    double p0 = 1.0;

    void validate() const
    {
        if (!(q > 0.0) || !(r > 0.0)) throw std::invalid_argument("LinearSystem: q and r must be positive");
        if (!(p0 >= 0.0)) throw std::invalid_argument("LinearSystem: P0 must be non-negative");
    }
};

// The benchmark system with prior (0, 1).
inline LinearSystem benchmark_linear_system()
{
    LinearSystem s;
    s.a = [](double t) { return 0.1 * (1.0 + t); };
    s.a_integral = [](double s0, double t) { return 0.1 * (t - s0) + 0.05 * (t * t - s0 * s0); };
    s.c = 0.2;
    s.q = 1.0;
    s.r = 1.0;
    s.m0 = 0.0;
    s.p0 = 1.0;
    return s;
}

struct KalmanState {
    double time = 0.0;
    double mean = 0.0;
    double var = 0.0;
};

// Kalman-Bucy filter discretised with Euler on the observation knots:
//   m += a m dt + (P c / r)(dY - c m dt)
//   P += (2 a P + q - P^2 c^2 / r) dt
// Returns one state per knot, starting from the prior at times[0].
inline std::vector<KalmanState> kalman_filter(LinearSystem const& sys, std::span<const double> times,
                                              std::span<const double> y)
{
    sys.validate();
    if (times.size() != y.size() || times.empty()) throw std::invalid_argument("kalman_filter: knot count mismatch");
    std::vector<KalmanState> out;
    out.reserve(times.size());
    double m = sys.m0;
    double p = sys.p0;
    out.push_back({times[0], m, p});
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double dt = times[k + 1] - times[k];
        if (!(dt > 0.0)) throw std::invalid_argument("kalman_filter: times must increase");
        const double a = sys.a(times[k]);
        const double dy = y[k + 1] - y[k];
        const double gain = p * sys.c / sys.r;
        const double mn = m + a * m * dt + gain * (dy - sys.c * m * dt);
        const double pn = p + (2.0 * a * p + sys.q - p * p * sys.c * sys.c / sys.r) * dt;
        if (!std::isfinite(mn) || !std::isfinite(pn)) {
            throw std::runtime_error("kalman_filter: non-finite state at t=" + std::to_string(times[k + 1]));
        }
        m = mn;
        p = std::max(pn, 0.0);
        out.push_back({times[k + 1], m, p});
    }
    return out;
}

// Conditional law of X_t given observations up to `state.time`, t >= s.
// The mean uses the closed form exp(int a) when available; the variance (and
// the mean otherwise) is integrated with Euler on the global grid of step
// `dt`, so splitting an interval at a grid point gives identical results.
inline KalmanState kalman_predict(LinearSystem const& sys, KalmanState const& state, double t, double dt = 1e-4)
{
    if (t < state.time) throw std::invalid_argument("kalman_predict: t < s");
    if (!(dt > 0.0)) throw std::invalid_argument("kalman_predict: step must be positive");
    KalmanState out = state;
    out.time = t;
    if (t == state.time) return out;

    double m = state.mean;
    double p = state.var;
    double u = state.time;
    while (u < t) {
        double next = (std::floor(u / dt + 1e-9) + 1.0) * dt;
        if (next <= u) next = u + dt;
        if (next > t || t - next < 1e-12) next = t;
        const double h = next - u;
        const double a = sys.a(u);
        m += a * m * h;
        p += (2.0 * a * p + sys.q) * h;
        u = next;
    }
    out.mean = sys.a_integral ? state.mean * std::exp(sys.a_integral(state.time, t)) : m;
    out.var = p;
    return out;
}

} // namespace csigwgan
