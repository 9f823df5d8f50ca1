#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "matrix.hpp"
#include "paths.hpp"
#include "rng.hpp"

namespace csigwgan {

// Signal-observation system
//   dX = b(t,X,Y) dt + sigma(t,X,Y) dW + rho(t,X,Y) dV
//   dY = h(t,X,Y) dt + dW
// with X in R^dim_x, Y and W in R^dim_y, V in R^dim_v.
struct SdeSystem {
    using Vector = std::vector<double>;
    using VectorField = std::function<Vector(double, std::span<const double>, std::span<const double>)>;
    using MatrixField = std::function<Matrix(double, std::span<const double>, std::span<const double>)>;
    using InitSampler = std::function<void(Rng&, Vector& x0, Vector& y0)>;

    std::string name;
    std::size_t dim_x = 1;
    std::size_t dim_y = 1;
    std::size_t dim_v = 1;
    VectorField drift;          // b, R^dim_x
    VectorField obs_drift;      // h, R^dim_y
    MatrixField diff_sigma;     // dim_x x dim_y, multiplies dW
    MatrixField diff_rho;       // dim_x x dim_v, multiplies dV
    InitSampler init;
};

struct Trajectory {
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> y;

    PiecewiseLinearPath x_path(Partition const& p) const { return {p, x}; }
    PiecewiseLinearPath y_path(Partition const& p) const { return {p, y}; }
};

struct Dataset {
    std::string system;
    std::uint64_t seed = 0;
    std::uint64_t first_id = 0;
    Partition partition;
    std::size_t dim_x = 1;
    std::size_t dim_y = 1;
    std::vector<Trajectory> trajectories;

    std::size_t size() const noexcept { return trajectories.size(); }
};

inline constexpr double kBlowUpBound = 1e8;

// The linear benchmark: dX = 0.1(1+t) X dt + dV, dY = 0.2 X dt + dW,
// X_0 and Y_0 independent standard normals.
inline SdeSystem benchmark_system()
{
    SdeSystem s;
    s.name = "eq14";
    s.drift = [](double t, std::span<const double> x, std::span<const double>) {
        return std::vector<double>{0.1 * (1.0 + t) * x[0]};
    };
    s.obs_drift = [](double, std::span<const double> x, std::span<const double>) {
        return std::vector<double>{0.2 * x[0]};
    };
    s.diff_sigma = [](double, std::span<const double>, std::span<const double>) { return Matrix(1, 1, 0.0); };
    s.diff_rho = [](double, std::span<const double>, std::span<const double>) { return Matrix(1, 1, 1.0); };
    s.init = [](Rng& rng, std::vector<double>& x0, std::vector<double>& y0) {
        x0 = {standard_normal(rng)};
        y0 = {standard_normal(rng)};
    };
    return s;
}

// Euler-Maruyama on the partition. Per step the generator is consumed as
// dim_y draws for dW followed by dim_v draws for dV; the same dW enters both
// equations.
inline Trajectory simulate(SdeSystem const& sys, Partition const& partition, Rng& rng)
{
    if (partition.size() < 2) throw std::invalid_argument("simulate: partition needs at least 2 points");
    const std::size_t n = partition.size();
    Trajectory tr;
    tr.x.resize(n);
    tr.y.resize(n);
    std::vector<double> x, y;
    sys.init(rng, x, y);
    if (x.size() != sys.dim_x || y.size() != sys.dim_y) {
        throw std::invalid_argument("simulate: initial sampler returned wrong dimensions");
    }
    tr.x[0] = x;
    tr.y[0] = y;
    std::vector<double> dw(sys.dim_y), dv(sys.dim_v);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double t = partition[k];
        const double dt = partition[k + 1] - t;
        const double sq = std::sqrt(dt);
        for (auto& w : dw) w = sq * standard_normal(rng);
        for (auto& v : dv) v = sq * standard_normal(rng);

        const auto b = sys.drift(t, x, y);
        const auto h = sys.obs_drift(t, x, y);
        const auto sigma = sys.diff_sigma(t, x, y);
        const auto rho = sys.diff_rho(t, x, y);
        std::vector<double> xn(sys.dim_x), yn(sys.dim_y);
        for (std::size_t i = 0; i < sys.dim_x; ++i) {
            double v = x[i] + b[i] * dt;
            for (std::size_t j = 0; j < sys.dim_y; ++j) v += sigma(i, j) * dw[j];
            for (std::size_t j = 0; j < sys.dim_v; ++j) v += rho(i, j) * dv[j];
            xn[i] = v;
        }
        for (std::size_t i = 0; i < sys.dim_y; ++i) yn[i] = y[i] + h[i] * dt + dw[i];

        for (double v : xn) {
            if (!std::isfinite(v) || std::abs(v) > kBlowUpBound) {
                throw std::runtime_error("simulate: signal blew up at step " + std::to_string(k + 1) +
                                         " (t=" + std::to_string(partition[k + 1]) + ")");
            }
        }
        for (double v : yn) {
            if (!std::isfinite(v) || std::abs(v) > kBlowUpBound) {
                throw std::runtime_error("simulate: observation blew up at step " + std::to_string(k + 1) +
                                         " (t=" + std::to_string(partition[k + 1]) + ")");
            }
        }
        x = std::move(xn);
        y = std::move(yn);
        tr.x[k + 1] = x;
        tr.y[k + 1] = y;
    }
    return tr;
}

inline Rng trajectory_stream(std::uint64_t seed, std::uint64_t id)
{
    return substream(seed, {stream::trajectory, id});
}

// Trajectories with ids first_id .. first_id+m-1; trajectory j is driven by
// its own substream, so any id range can be regenerated independently.
inline Dataset generate_dataset(SdeSystem const& sys, Partition const& partition, std::size_t m,
                                std::uint64_t seed, std::uint64_t first_id = 0)
{
    if (m < 1) throw std::invalid_argument("generate_dataset: m must be >= 1");
    Dataset ds;
    ds.system = sys.name;
    ds.seed = seed;
    ds.first_id = first_id;
    ds.partition = partition;
    ds.dim_x = sys.dim_x;
    ds.dim_y = sys.dim_y;
    ds.trajectories.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        auto rng = trajectory_stream(seed, first_id + j);
        try {
            ds.trajectories.push_back(simulate(sys, partition, rng));
        } catch (std::runtime_error const& e) {
            throw std::runtime_error("trajectory " + std::to_string(first_id + j) + ": " + e.what());
        }
    }
    return ds;
}

// --- serialization --------------------------------------------------------

// Shortest representation that round-trips exactly.
inline void append_number(std::string& out, double v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

inline double parse_number(std::string_view s)
{
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw std::runtime_error("cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string dataset_csv(Dataset const& ds)
{
    std::string out = "traj_id,t";
    for (std::size_t i = 1; i <= ds.dim_x; ++i) out += ",x_" + std::to_string(i);
    for (std::size_t i = 1; i <= ds.dim_y; ++i) out += ",y_" + std::to_string(i);
    out += '\n';
    for (std::size_t j = 0; j < ds.size(); ++j) {
        auto const& tr = ds.trajectories[j];
        const std::string id = std::to_string(ds.first_id + j);
        for (std::size_t k = 0; k < ds.partition.size(); ++k) {
            out += id;
            out += ',';
            append_number(out, ds.partition[k]);
            for (double v : tr.x[k]) {
                out += ',';
                append_number(out, v);
            }
            for (double v : tr.y[k]) {
                out += ',';
                append_number(out, v);
            }
            out += '\n';
        }
    }
    return out;
}

inline nlohmann::json dataset_metadata(Dataset const& ds)
{
    return nlohmann::json{{"system", ds.system},
                          {"seed", ds.seed},
                          {"first_id", ds.first_id},
                          {"m", ds.size()},
                          {"dim_x", ds.dim_x},
                          {"dim_y", ds.dim_y},
                          {"partition", {{"horizon", ds.partition.back()}, {"knots", ds.partition.size()}}}};
}

inline void write_text_file(std::string const& path, std::string const& content)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

inline std::string read_text_file(std::string const& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Writes <stem>.csv and <stem>.json.
inline void write_dataset(Dataset const& ds, std::string const& stem)
{
    write_text_file(stem + ".csv", dataset_csv(ds));
    write_text_file(stem + ".json", dataset_metadata(ds).dump(2) + "\n");
}

inline Dataset parse_dataset_csv(std::string const& text, std::size_t dim_x, std::size_t dim_y)
{
    Dataset ds;
    ds.dim_x = dim_x;
    ds.dim_y = dim_y;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset csv: empty file");
    const std::size_t ncols = 2 + dim_x + dim_y;
    if (split_csv_line(line).size() != ncols) throw std::runtime_error("dataset csv: unexpected header '" + line + "'");

    std::vector<double> times;
    bool first_traj = true;
    long long current = -1;
    std::size_t k = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = split_csv_line(line);
        if (cols.size() != ncols) throw std::runtime_error("dataset csv: line " + std::to_string(lineno) + " has wrong column count");
        const long long id = static_cast<long long>(parse_number(cols[0]));
        const double t = parse_number(cols[1]);
        if (id != current) {
            if (current >= 0) first_traj = false;
            if (current < 0) ds.first_id = static_cast<std::uint64_t>(id);
            else if (id != current + 1) throw std::runtime_error("dataset csv: trajectory ids not consecutive");
            current = id;
            ds.trajectories.emplace_back();
            k = 0;
        }
        if (first_traj) {
            times.push_back(t);
        } else if (k >= times.size() || times[k] != t) {
            throw std::runtime_error("dataset csv: trajectory " + std::to_string(id) + " uses a different partition");
        }
        auto& tr = ds.trajectories.back();
        std::vector<double> x(dim_x), y(dim_y);
        for (std::size_t i = 0; i < dim_x; ++i) x[i] = parse_number(cols[2 + i]);
        for (std::size_t i = 0; i < dim_y; ++i) y[i] = parse_number(cols[2 + dim_x + i]);
        tr.x.push_back(std::move(x));
        tr.y.push_back(std::move(y));
        ++k;
    }
    if (ds.trajectories.empty()) throw std::runtime_error("dataset csv: no rows");
    ds.partition = Partition(std::move(times));
    for (auto const& tr : ds.trajectories) {
        if (tr.x.size() != ds.partition.size()) throw std::runtime_error("dataset csv: truncated trajectory");
    }
    return ds;
}

// Reads <stem>.csv and its <stem>.json sidecar.
inline Dataset read_dataset(std::string const& stem)
{
    auto meta = nlohmann::json::parse(read_text_file(stem + ".json"));
    auto ds = parse_dataset_csv(read_text_file(stem + ".csv"), meta.at("dim_x").get<std::size_t>(),
                                meta.at("dim_y").get<std::size_t>());
    ds.system = meta.at("system").get<std::string>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    return ds;
}

} // namespace csigwgan
