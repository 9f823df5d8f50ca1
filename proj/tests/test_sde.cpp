#include <catch_amalgamated.hpp>

#include <filesystem>

#include "support.hpp"

using namespace csigwgan;
using Catch::Approx;

namespace {

SdeSystem scalar_system(double b, double sigma, double rho, double h)
{
    SdeSystem s;
    s.name = "test";
    s.drift = [b](double, std::span<const double>, std::span<const double>) { return std::vector<double>{b}; };
    s.obs_drift = [h](double, std::span<const double>, std::span<const double>) { return std::vector<double>{h}; };
    s.diff_sigma = [sigma](double, std::span<const double>, std::span<const double>) { return Matrix(1, 1, sigma); };
    s.diff_rho = [rho](double, std::span<const double>, std::span<const double>) { return Matrix(1, 1, rho); };
    s.init = [](Rng&, std::vector<double>& x0, std::vector<double>& y0) {
        x0 = {0.5};
        y0 = {-1.0};
    };
    return s;
}

std::filesystem::path scratch(std::string const& name)
{
    auto dir = std::filesystem::temp_directory_path() / "csigwgan_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("signal without diffusion follows its drift exactly", "[sde]")
{
    auto sys = scalar_system(1.0, 0.0, 0.0, 0.0);
    auto part = Partition::equidistant(1.0, 11);
    auto rng = substream(1, {});
    auto tr = simulate(sys, part, rng);
    for (std::size_t k = 0; k < part.size(); ++k) {
        CHECK(tr.x[k][0] == Approx(0.5 + part[k]).margin(1e-14));
    }
}

TEST_CASE("with zero drift and rho = 1 the signal increments are the dV draws", "[sde]")
{
    auto sys = scalar_system(0.0, 0.0, 1.0, 0.0);
    auto part = Partition::equidistant(1.0, 6);
    auto rng = substream(2, {});
    auto tr = simulate(sys, part, rng);

    auto replay = substream(2, {});
    const double sq = std::sqrt(0.2);
    for (std::size_t k = 0; k + 1 < part.size(); ++k) {
        const double dw = sq * standard_normal(replay);
        const double dv = sq * standard_normal(replay);
        CHECK(tr.x[k + 1][0] - tr.x[k][0] == Approx(dv).margin(1e-14));
        CHECK(tr.y[k + 1][0] - tr.y[k][0] == Approx(dw).margin(1e-14));
    }
}

TEST_CASE("shared noise: X and Y increments coincide when sigma = 1, rho = 0, h = 0", "[sde][property]")
{
    auto sys = scalar_system(0.3, 1.0, 0.0, 0.0);
    auto part = Partition::equidistant(1.0, 21);
    auto rng = substream(3, {});
    auto tr = simulate(sys, part, rng);
    for (std::size_t k = 0; k + 1 < part.size(); ++k) {
        const double dx = tr.x[k + 1][0] - tr.x[k][0] - 0.3 * 0.05;
        CHECK(dx == Approx(tr.y[k + 1][0] - tr.y[k][0]).margin(1e-13));
    }
}

TEST_CASE("blow-up aborts with a diagnostic", "[sde]")
{
    SdeSystem sys = scalar_system(0.0, 0.0, 0.0, 0.0);
    sys.drift = [](double, std::span<const double> x, std::span<const double>) { return std::vector<double>{1e3 * x[0] * x[0]}; };
    auto part = Partition::equidistant(1.0, 101);
    auto rng = substream(4, {});
    CHECK_THROWS_WITH(simulate(sys, part, rng), Catch::Matchers::ContainsSubstring("blew up"));
}

TEST_CASE("benchmark system coefficients", "[sde]")
{
    auto sys = benchmark_system();
    std::vector<double> one{1.0}, five{5.0}, y{0.0};
    CHECK(sys.drift(0.0, one, y)[0] == Approx(0.1));
    CHECK(sys.drift(1.0, one, y)[0] == Approx(0.2));
    CHECK(sys.obs_drift(0.0, five, y)[0] == Approx(1.0));
    CHECK(sys.diff_sigma(0.3, one, y)(0, 0) == 0.0);
    CHECK(sys.diff_rho(0.3, one, y)(0, 0) == 1.0);
    CHECK(sys.dim_x == 1);
    CHECK(sys.dim_y == 1);
    CHECK(sys.dim_v == 1);
}

TEST_CASE("benchmark initial law is standard normal", "[sde][oracle]")
{
    const std::size_t m = 20000;
    auto ds = generate_dataset(benchmark_system(), Partition::equidistant(1.0, 3), m, 5);
    double mean = 0.0;
    for (auto const& tr : ds.trajectories) mean += tr.x[0][0];
    mean /= double(m);
    double var = 0.0;
    for (auto const& tr : ds.trajectories) var += (tr.x[0][0] - mean) * (tr.x[0][0] - mean);
    var /= double(m - 1);
    CHECK(std::abs(mean) < 3.0 / std::sqrt(double(m)));
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("benchmark mean at T stays at zero", "[sde][oracle]")
{
    const std::size_t m = 10000;
    auto ds = generate_dataset(benchmark_system(), Partition::equidistant(1.0, 101), m, 6);
    double mean = 0.0, sq = 0.0, var0 = 0.0;
    for (auto const& tr : ds.trajectories) {
        mean += tr.x.back()[0];
        sq += tr.x.back()[0] * tr.x.back()[0];
        var0 += tr.x[0][0] * tr.x[0][0];
    }
    mean /= double(m);
    const double var = sq / double(m) - mean * mean;
    CHECK(std::abs(mean) < 3.0 * std::sqrt(var / double(m)));
    CHECK(var > var0 / double(m));
}

TEST_CASE("generate_dataset is reproducible and substream-addressable", "[sde]")
{
    auto sys = benchmark_system();
    auto part = Partition::equidistant(1.0, 11);
    auto a = generate_dataset(sys, part, 5, 42);
    auto b = generate_dataset(sys, part, 5, 42);
    CHECK(dataset_csv(a) == dataset_csv(b));

    auto one = generate_dataset(sys, part, 1, 42);
    auto rng = trajectory_stream(42, 0);
    auto tr = simulate(sys, part, rng);
    CHECK(one.trajectories[0].x == tr.x);
    CHECK(one.trajectories[0].y == tr.y);

    auto tail = generate_dataset(sys, part, 2, 42, 3);
    CHECK(tail.trajectories[0].x == a.trajectories[3].x);
    CHECK(tail.trajectories[1].y == a.trajectories[4].y);

    auto other = generate_dataset(sys, part, 5, 43);
    CHECK(dataset_csv(other) != dataset_csv(a));
    CHECK_THROWS_AS(generate_dataset(sys, part, 0, 42), std::invalid_argument);
}

TEST_CASE("dataset files round-trip exactly", "[sde][io]")
{
    auto ds = generate_dataset(benchmark_system(), Partition::equidistant(1.0, 21), 7, 9, 100);
    auto stem = scratch("roundtrip").string();
    write_dataset(ds, stem);
    auto back = read_dataset(stem);
    CHECK(back.seed == 9);
    CHECK(back.first_id == 100);
    CHECK(back.system == "eq14");
    CHECK(back.partition == ds.partition);
    REQUIRE(back.size() == ds.size());
    for (std::size_t j = 0; j < ds.size(); ++j) {
        CHECK(back.trajectories[j].x == ds.trajectories[j].x);
        CHECK(back.trajectories[j].y == ds.trajectories[j].y);
    }
    CHECK(dataset_csv(back) == dataset_csv(ds));
}

TEST_CASE("malformed dataset CSV is rejected", "[sde][io]")
{
    CHECK_THROWS(parse_dataset_csv("traj_id,t,x_1,y_1\n0,0,1\n", 1, 1));
    CHECK_THROWS(parse_dataset_csv("traj_id,t,x_1,y_1\n0,0,abc,1\n", 1, 1));
    CHECK_THROWS(parse_dataset_csv("a,b\n", 1, 1));
}
