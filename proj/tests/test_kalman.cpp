#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace csigwgan;
using Catch::Approx;

namespace {

LinearSystem constant_system(double a, double c)
{
    LinearSystem s;
    s.a = [a](double) { return a; };
    s.c = c;
    s.q = 1.0;
    s.r = 1.0;
    s.m0 = 0.7;
    s.p0 = 2.0;
    return s;
}

} // namespace

TEST_CASE("unobserved, driftless filter keeps the prior mean", "[kalman]")
{
    auto sys = constant_system(0.0, 0.0);
    auto times = Partition::equidistant(1.0, 51).times();
    std::vector<double> y(times.size());
    auto rng = substream(1, {});
    for (auto& v : y) v = standard_normal(rng);
    auto out = kalman_filter(sys, times, y);
    REQUIRE(out.size() == times.size());
    for (auto const& st : out) CHECK(st.mean == 0.7);
    CHECK(out.back().var == Approx(2.0 + 1.0).margin(1e-12));
}

TEST_CASE("Riccati equation reaches its steady state", "[kalman][oracle]")
{
    auto sys = constant_system(0.0, 1.0);
    sys.p0 = 5.0;
    auto times = Partition::equidistant(20.0, 20001).times();
    std::vector<double> y(times.size(), 0.0);
    auto out = kalman_filter(sys, times, y);
    // P* solves q - P^2 c^2 / r = 0, so P* = 1.
    CHECK(std::abs(out.back().var - 1.0) < 1e-3);
    for (auto const& st : out) CHECK(st.var >= 0.0);
}

TEST_CASE("filter rejects bad input", "[kalman]")
{
    auto sys = benchmark_linear_system();
    std::vector<double> t{0.0, 0.1}, y{0.0};
    CHECK_THROWS_AS(kalman_filter(sys, t, y), std::invalid_argument);
    std::vector<double> t2{0.0, 0.0}, y2{0.0, 0.0};
    CHECK_THROWS_AS(kalman_filter(sys, t2, y2), std::invalid_argument);
    sys.q = 0.0;
    std::vector<double> y3{0.0, 0.0};
    CHECK_THROWS_AS(kalman_filter(sys, t, y3), std::invalid_argument);
    auto big = benchmark_linear_system();
    std::vector<double> yb{0.0, NAN};
    CHECK_THROWS_AS(kalman_filter(big, std::vector<double>{0.0, 1.0}, yb), std::runtime_error);
}

TEST_CASE("predict", "[kalman]")
{
    auto sys = benchmark_linear_system();
    KalmanState s{0.5, 1.0, 0.3};
    auto same = kalman_predict(sys, s, 0.5);
    CHECK(same.mean == 1.0);
    CHECK(same.var == 0.3);

    auto p = kalman_predict(sys, s, 1.0);
    CHECK(p.mean == Approx(std::exp(0.0875)).epsilon(1e-14));
    CHECK(p.mean == Approx(1.09144).margin(1e-5));
    CHECK_THROWS_AS(kalman_predict(sys, s, 0.4), std::invalid_argument);

    auto flat = constant_system(0.0, 1.0);
    auto q = kalman_predict(flat, s, 1.3);
    CHECK(q.mean == 1.0);
    CHECK(q.var == Approx(0.3 + 0.8).margin(1e-12));
}

TEST_CASE("predict variance matches the closed form of dP = (2aP + q) dt", "[kalman][oracle]")
{
    auto sys = benchmark_linear_system();
    KalmanState s{0.5, 0.2, 0.4};
    // With A(t) = int_s^t a, P_t = e^{2A(t)} (P_s + q int_s^t e^{-2A(u)} du).
    auto A = [&](double t) { return sys.a_integral(0.5, t); };
    double integral = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = 0.5 + (i + 0.5) * 0.5 / n;
        integral += std::exp(-2.0 * A(u)) * 0.5 / n;
    }
    const double expect = std::exp(2.0 * A(1.0)) * (0.4 + integral);
    CHECK(kalman_predict(sys, s, 1.0).var == Approx(expect).epsilon(1e-3));
}

TEST_CASE("predict has the semigroup property", "[kalman][property]")
{
    auto closed = benchmark_linear_system();
    auto euler = closed;
    euler.a_integral = nullptr;
    KalmanState s{0.5, 1.3, 0.6};
    for (double t1 : {0.6, 0.73, 0.9}) {
        for (auto const* sys : {&closed, &euler}) {
            auto direct = kalman_predict(*sys, s, 1.0);
            auto split = kalman_predict(*sys, kalman_predict(*sys, s, t1), 1.0);
            const double tol = sys == &closed ? 1e-9 : 1e-6;
            CHECK(std::abs(direct.mean - split.mean) < tol);
            CHECK(std::abs(direct.var - split.var) < 1e-6);
        }
    }
    auto e = kalman_predict(euler, s, 1.0);
    auto c = kalman_predict(closed, s, 1.0);
    CHECK(e.mean == Approx(c.mean).epsilon(1e-4));
}

TEST_CASE("prediction at s continues the filter", "[kalman]")
{
    auto sys = benchmark_linear_system();
    auto ds = generate_dataset(benchmark_system(), Partition::equidistant(1.0, 101), 1, 3);
    std::vector<double> t, y;
    for (std::size_t k = 0; k <= 50; ++k) {
        t.push_back(ds.partition[k]);
        y.push_back(ds.trajectories[0].y[k][0]);
    }
    auto f = kalman_filter(sys, t, y);
    auto p = kalman_predict(sys, f.back(), f.back().time);
    CHECK(p.mean == f.back().mean);
    CHECK(p.var == f.back().var);
}

TEST_CASE("filter variance is consistent with the realised error", "[kalman][oracle]")
{
    auto sys = benchmark_linear_system();
    auto ds = generate_dataset(benchmark_system(), Partition::equidistant(1.0, 101), 1000, 17);
    auto const& times = ds.partition.times();
    double err = 0.0, var = 0.0;
    for (auto const& tr : ds.trajectories) {
        std::vector<double> y;
        for (auto const& v : tr.y) y.push_back(v[0]);
        auto f = kalman_filter(sys, times, y);
        for (std::size_t k = 0; k < times.size(); ++k) {
            err += (tr.x[k][0] - f[k].mean) * (tr.x[k][0] - f[k].mean);
            var += f[k].var;
        }
    }
    CHECK(std::abs(err / var - 1.0) < 0.1);
}
