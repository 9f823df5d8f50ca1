#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "csigwgan.hpp"

namespace testing_support {

using csigwgan::Matrix;
using csigwgan::PiecewiseLinearPath;
using csigwgan::Rng;
using csigwgan::TruncatedTensor;

inline std::vector<double> uniform_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

inline TruncatedTensor random_tensor(std::size_t dim, std::size_t depth, Rng& rng)
{
    auto shape = csigwgan::make_shape(dim, depth);
    return TruncatedTensor(shape, uniform_vector(shape.size(), rng));
}

// Random piecewise-linear path on [t0, t1] with `knots` knots at random
// (strictly increasing) times.
inline PiecewiseLinearPath random_path(std::size_t dim, std::size_t knots, Rng& rng, double t0 = 0.0, double t1 = 1.0)
{
    std::vector<double> times = uniform_vector(knots, rng, t0, t1);
    std::sort(times.begin(), times.end());
    times.front() = t0;
    times.back() = t1;
    for (std::size_t i = 1; i < knots; ++i) {
        if (times[i] <= times[i - 1]) times[i] = std::nextafter(times[i - 1], 2.0 * t1 + 1.0);
    }
    std::vector<std::vector<double>> values;
    for (std::size_t i = 0; i < knots; ++i) values.push_back(uniform_vector(dim, rng));
    return PiecewiseLinearPath(csigwgan::Partition(times), values);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) return INFINITY;
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Independent signature oracle: the coefficient of a word w over a polyline
// with increments D_1..D_J is the sum over ways of cutting w into consecutive
// (possibly empty) blocks assigned to segments 1..J in order, each block of
// length r on segment j contributing prod D_j[letter] / r!.
inline double word_coefficient(std::vector<std::vector<double>> const& increments, std::vector<std::size_t> const& word)
{
    const std::size_t n = word.size();
    const std::size_t segs = increments.size();
    // dp[i] = sum over assignments of the first i letters to segments seen so far
    std::vector<double> dp(n + 1, 0.0);
    dp[0] = 1.0;
    for (std::size_t j = 0; j < segs; ++j) {
        std::vector<double> next(n + 1, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (dp[i] == 0.0) continue;
            double prod = 1.0;
            double fact = 1.0;
            next[i] += dp[i];
            for (std::size_t r = 1; i + r <= n; ++r) {
                prod *= increments[j][word[i + r - 1]];
                fact *= double(r);
                next[i + r] += dp[i] * prod / fact;
            }
        }
        dp = std::move(next);
    }
    return dp[n];
}

inline std::vector<double> oracle_signature(std::vector<std::vector<double>> const& points, std::size_t depth)
{
    const std::size_t dim = points.front().size();
    std::vector<std::vector<double>> inc;
    for (std::size_t j = 1; j < points.size(); ++j) {
        std::vector<double> d(dim);
        for (std::size_t i = 0; i < dim; ++i) d[i] = points[j][i] - points[j - 1][i];
        inc.push_back(std::move(d));
    }
    std::vector<double> out;
    for (std::size_t n = 0; n <= depth; ++n) {
        std::size_t count = 1;
        for (std::size_t k = 0; k < n; ++k) count *= dim;
        for (std::size_t w = 0; w < count; ++w) {
            std::vector<std::size_t> word(n);
            std::size_t rest = w;
            for (std::size_t k = n; k-- > 0;) {
                word[k] = rest % dim;
                rest /= dim;
            }
            out.push_back(word_coefficient(inc, word));
        }
    }
    return out;
}

// Central finite difference of a scalar function of a flat parameter vector.
inline std::vector<double> numeric_gradient(std::function<double(std::vector<double> const&)> const& f,
                                            std::vector<double> x, double h = 1e-5)
{
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// ||analytic - numeric||_inf / ||numeric||_inf.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric)
{
    double scale = 0.0;
    for (double v : numeric) scale = std::max(scale, std::abs(v));
    return max_abs_diff(analytic, numeric) / std::max(scale, 1e-8);
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    return Matrix(r, c, uniform_vector(r * c, rng, lo, hi));
}

using Op = std::function<csigwgan::ad::Var(csigwgan::ad::Tape&, std::vector<csigwgan::ad::Var> const&)>;

// Contracts the op output with fixed random weights and compares the tape
// gradient of every input with central differences. Returns the worst
// relative error.
inline double gradient_error(Op const& op, std::vector<Matrix> inputs, Rng& rng)
{
    namespace ad = csigwgan::ad;
    Matrix weights;
    auto evaluate = [&](std::vector<Matrix> const& in, std::vector<Matrix>* grads) {
        ad::Tape tape;
        std::vector<ad::Var> vars;
        for (auto const& m : in) vars.push_back(tape.variable(m));
        auto out = op(tape, vars);
        if (weights.size() == 0) weights = random_matrix(tape.value(out).rows(), tape.value(out).cols(), rng);
        auto loss = ad::sum(ad::hadamard(out, tape.constant(weights)));
        if (grads) {
            tape.backward(loss);
            for (auto v : vars) grads->push_back(tape.grad(v));
        }
        return tape.scalar(loss);
    };
    std::vector<Matrix> grads;
    evaluate(inputs, &grads);
    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto f = [&](std::vector<double> const& x) {
            auto in = inputs;
            in[i].values() = x;
            return evaluate(in, nullptr);
        };
        auto num = numeric_gradient(f, inputs[i].values());
        worst = std::max(worst, relative_error(grads[i].values(), num));
    }
    return worst;
}

struct NamedOp {
    char const* name;
    Op op;
    std::vector<Matrix> inputs;
};

// One case per tape primitive plus a small composite.
inline std::vector<NamedOp> primitive_cases(Rng& rng)
{
    namespace ad = csigwgan::ad;
    auto shape = csigwgan::make_shape(2, 3);
    auto m = [&](std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) { return random_matrix(r, c, rng, lo, hi); };
    using V = std::vector<ad::Var>;
    return {
        {"add", [](ad::Tape&, V const& v) { return v[0] + v[1]; }, {m(3, 4), m(3, 4)}},
        {"sub", [](ad::Tape&, V const& v) { return v[0] - v[1]; }, {m(3, 4), m(3, 4)}},
        {"hadamard", [](ad::Tape&, V const& v) { return ad::hadamard(v[0], v[1]); }, {m(3, 4), m(3, 4)}},
        {"scale", [](ad::Tape&, V const& v) { return ad::scale(v[0], -1.7); }, {m(2, 3)}},
        {"add_row", [](ad::Tape&, V const& v) { return ad::add_row(v[0], v[1]); }, {m(4, 3), m(1, 3)}},
        {"matmul", [](ad::Tape&, V const& v) { return ad::matmul(v[0], v[1]); }, {m(3, 4), m(4, 2)}},
        {"matmul_nt", [](ad::Tape&, V const& v) { return ad::matmul_nt(v[0], v[1]); }, {m(3, 4), m(5, 4)}},
        {"tanh", [](ad::Tape&, V const& v) { return ad::tanh(v[0]); }, {m(3, 3, -2.0, 2.0)}},
        {"relu", [](ad::Tape&, V const& v) { return ad::relu(v[0]); }, {m(3, 3, 0.1, 1.0)}},
        {"relu negative", [](ad::Tape&, V const& v) { return ad::relu(v[0]); }, {m(3, 3, -1.0, -0.1)}},
        {"sum", [](ad::Tape&, V const& v) { return ad::sum(v[0]); }, {m(3, 2)}},
        {"mean", [](ad::Tape&, V const& v) { return ad::mean(v[0]); }, {m(3, 2)}},
        {"l2_norm", [](ad::Tape&, V const& v) { return ad::l2_norm(v[0]); }, {m(3, 2)}},
        {"row_norms", [](ad::Tape&, V const& v) { return ad::row_norms(v[0]); }, {m(4, 3)}},
        {"concat_cols", [](ad::Tape&, V const& v) { return ad::concat_cols({v[0], v[1]}); }, {m(3, 2), m(3, 1)}},
        {"slice_cols", [](ad::Tape&, V const& v) { return ad::slice_cols(v[0], 1, 2); }, {m(3, 4)}},
        {"repeat_rows", [](ad::Tape&, V const& v) { return ad::repeat_rows(v[0], 3); }, {m(2, 3)}},
        {"group_mean_rows", [](ad::Tape&, V const& v) { return ad::group_mean_rows(v[0], 3); }, {m(6, 2)}},
        {"rows_matvec", [](ad::Tape&, V const& v) { return ad::rows_matvec(v[0], v[1]); }, {m(3, 6), m(3, 2)}},
        {"tensor_exp_rows", [shape](ad::Tape&, V const& v) { return ad::tensor_exp_rows(v[0], shape); }, {m(3, 2)}},
        {"tensor_mul_rows", [shape](ad::Tape&, V const& v) { return ad::tensor_mul_rows(v[0], v[1], shape); },
         {m(2, shape.size()), m(2, shape.size())}},
        {"composite", [](ad::Tape&, V const& v) { return ad::tanh(ad::matmul(v[0], v[1]) + v[2]); }, {m(3, 4), m(4, 2), m(3, 2)}},
    };
}

// Gradient of the batch Sig-W1 loss for a latent-2 generator on 4 knots,
// depth 2, two trajectories. Returns the relative error against central
// differences over all parameters.
inline double end_to_end_gradient_error(std::uint64_t seed)
{
    using namespace csigwgan;
    GeneratorConfig c;
    c.latent_dim = 2;
    c.partition = Partition::equidistant(1.0, 4);
    c.s = c.partition[1];
    c.t_end = 1.0;
    c.mc_samples = 3;
    auto ds = generate_dataset(benchmark_system(), c.partition, 2, seed);
    RegressionOptions opt;
    opt.depth = 2;
    opt.s = c.s;
    opt.t = c.t_end;
    auto reg = fit_regression(ds, opt);
    std::vector<std::vector<double>> preds;
    for (auto const& tr : ds.trajectories) preds.push_back(predict_conditional_signature(reg, tr.y_path(ds.partition)).coeffs());
    auto rng = substream(seed, {1});
    auto params = init_generator(c, rng);
    std::vector<std::size_t> idx{0, 1};

    auto res = evaluate_batch(params, c, reg, ds, preds, idx, 1, true, 2.0, seed, stream::latent, 0);
    std::vector<double> analytic, flat;
    for (auto const& g : res.grads) analytic.insert(analytic.end(), g.values().begin(), g.values().end());
    for (auto* m : params.parameters()) flat.insert(flat.end(), m->values().begin(), m->values().end());

    auto f = [&](std::vector<double> const& x) {
        auto q = params;
        std::size_t off = 0;
        for (auto* m : q.parameters()) {
            std::copy(x.begin() + std::ptrdiff_t(off), x.begin() + std::ptrdiff_t(off + m->size()), m->values().begin());
            off += m->size();
        }
        return evaluate_batch(q, c, reg, ds, preds, idx, 1, false, 1.0, seed, stream::latent, 0).loss_sum / 2.0;
    };
    return relative_error(analytic, numeric_gradient(f, flat));
}

// Observation: random walk from 0 on 21 knots of [0, 1]. Signal: 0 before
// s = 0.5, frozen at a * Y_s + b from s on.
inline csigwgan::Dataset frozen_signal_dataset(std::size_t m, double a, double b, std::uint64_t seed)
{
    using namespace csigwgan;
    Dataset ds;
    ds.system = "frozen";
    ds.partition = Partition::equidistant(1.0, 21);
    const std::size_t si = ds.partition.index_of(0.5);
    auto rng = substream(seed, {});
    for (std::size_t j = 0; j < m; ++j) {
        Trajectory tr;
        double y = 0.0;
        for (std::size_t k = 0; k < ds.partition.size(); ++k) {
            if (k > 0) y += std::sqrt(0.05) * standard_normal(rng);
            tr.y.push_back({y});
        }
        const double c = a * tr.y[si][0] + b;
        for (std::size_t k = 0; k < ds.partition.size(); ++k) tr.x.push_back({k < si ? 0.0 : c});
        ds.trajectories.push_back(std::move(tr));
    }
    return ds;
}

inline std::vector<std::size_t> all_indices(csigwgan::Dataset const& ds)
{
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

// Least-squares slope of log Var[MC estimate of X_t] against log N for a
// freshly initialised default generator and one random observation path.
inline double mc_variance_slope(std::uint64_t seed, std::vector<std::size_t> const& ns = {8, 32, 128, 512}, int reps = 200)
{
    using namespace csigwgan;
    GeneratorConfig c;
    auto rng = substream(seed, {});
    auto p = init_generator(c, rng);
    std::vector<std::vector<double>> v;
    for (std::size_t i = 0; i < c.partition.size(); ++i) v.push_back({standard_normal(rng)});
    PiecewiseLinearPath y(c.partition, v);
    auto identity = [](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); };
    std::vector<double> lx, ly;
    for (std::size_t n : ns) {
        c.mc_samples = n;
        double s = 0.0, sq = 0.0;
        for (int r = 0; r < reps; ++r) {
            auto sub = substream(seed, {n, std::uint64_t(r)});
            const double e = mc_estimate(p, c, y, identity, sub)[0];
            s += e;
            sq += e * e;
        }
        lx.push_back(std::log(double(n)));
        ly.push_back(std::log((sq - s * s / reps) / (reps - 1)));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / double(lx.size());
        my += ly[i] / double(lx.size());
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

} // namespace testing_support
