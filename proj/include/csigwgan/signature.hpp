#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "paths.hpp"
#include "tensor_algebra.hpp"

namespace csigwgan {

// Whether the polyline is started from the origin before its first knot.
// With Basepoint::origin the signature also sees the starting value, not
// only the increments.
enum class Basepoint { none, origin };

// Signature of the polyline through `points` (each of length dim): the
// Chen product of the segment exponentials, folded left to right.
inline TruncatedTensor polyline_signature(std::span<const std::vector<double>> points, std::size_t depth,
                                          Basepoint basepoint = Basepoint::none)
{
    if (points.empty()) throw std::invalid_argument("signature: empty path");
    const std::size_t dim = points.front().size();
    const std::size_t segments = points.size() - 1 + (basepoint == Basepoint::origin ? 1 : 0);
    if (segments == 0) throw std::invalid_argument("signature: degenerate path with a single knot");
    auto shape = make_shape(dim, depth);

    std::vector<double> acc(shape.size(), 0.0), seg(shape.size()), next(shape.size());
    acc[0] = 1.0;
    std::vector<double> inc(dim);
    auto fold = [&](std::vector<double> const& from, std::vector<double> const& to) {
        if (to.size() != dim) throw std::invalid_argument("signature: ragged path values");
        for (std::size_t i = 0; i < dim; ++i) inc[i] = to[i] - from[i];
        kernels::exp_into(shape, inc, seg);
        std::fill(next.begin(), next.end(), 0.0);
        kernels::mul_accumulate(shape, acc, seg, next);
        acc.swap(next);
    };
    if (basepoint == Basepoint::origin) fold(std::vector<double>(dim, 0.0), points.front());
    for (std::size_t j = 1; j < points.size(); ++j) fold(points[j - 1], points[j]);
    return TruncatedTensor(shape, std::move(acc));
}

inline TruncatedTensor path_signature(PiecewiseLinearPath const& p, std::size_t depth,
                                      Basepoint basepoint = Basepoint::none)
{
    if (depth < 1) throw std::invalid_argument("path_signature: depth must be >= 1");
    if (p.knots() < 2 && basepoint == Basepoint::none) {
        throw std::invalid_argument("path_signature: degenerate path with a single knot");
    }
    return polyline_signature(p.values(), depth, basepoint);
}

// Arithmetic mean of path signatures, summed in index order.
inline TruncatedTensor expected_signature(std::span<const PiecewiseLinearPath> paths, std::size_t depth,
                                          Basepoint basepoint = Basepoint::none)
{
    if (paths.empty()) throw std::invalid_argument("expected_signature: empty collection");
    const std::size_t dim = paths.front().dim();
    std::vector<double> sum(make_shape(dim, depth).size(), 0.0);
    for (auto const& p : paths) {
        if (p.dim() != dim) throw std::invalid_argument("expected_signature: dimension mismatch");
        auto s = path_signature(p, depth, basepoint);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += s[i];
    }
    const double inv = 1.0 / static_cast<double>(paths.size());
    for (auto& x : sum) x *= inv;
    return TruncatedTensor(make_shape(dim, depth), std::move(sum));
}

// Applies a linear functional given as a row-major (outputs x sig.size())
// matrix to the flattened signature.
inline std::vector<double> linear_functional_apply(std::span<const double> functional, TruncatedTensor const& sig)
{
    const std::size_t m = sig.size();
    if (functional.empty() || functional.size() % m != 0) {
        throw std::invalid_argument("linear_functional_apply: functional length " +
                                    std::to_string(functional.size()) + " is not a multiple of " +
                                    std::to_string(m));
    }
    const std::size_t out_dim = functional.size() / m;
    std::vector<double> out(out_dim, 0.0);
    for (std::size_t r = 0; r < out_dim; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m; ++c) acc += functional[r * m + c] * sig[c];
        out[r] = acc;
    }
    return out;
}

} // namespace csigwgan
