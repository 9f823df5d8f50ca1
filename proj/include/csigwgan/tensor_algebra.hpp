#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace csigwgan {

// Shape of the truncated tensor algebra T^N(R^d). Coefficients are stored
// level by level; inside level k the word (i_1,...,i_k) sits at
// level_offset(k) + sum_j i_j d^(k-j), i.e. lexicographic order.
struct TensorShape {
    std::size_t dim = 1;
    std::size_t depth = 0;

    std::size_t level_size(std::size_t k) const
    {
        std::size_t s = 1;
        for (std::size_t i = 0; i < k; ++i) s *= dim;
        return s;
    }
    std::size_t level_offset(std::size_t k) const
    {
        std::size_t off = 0;
        for (std::size_t i = 0; i < k; ++i) off += level_size(i);
        return off;
    }
    std::size_t size() const { return level_offset(depth + 1); }

    bool operator==(TensorShape const&) const = default;
};

inline TensorShape make_shape(std::size_t dim, std::size_t depth)
{
    if (dim < 1) throw std::invalid_argument("tensor algebra: dim must be >= 1");
    return TensorShape{dim, depth};
}

namespace kernels {

// out += a (x) b, truncated. All three spans have shape.size() entries.
inline void mul_accumulate(TensorShape const& shape, std::span<const double> a,
                           std::span<const double> b, std::span<double> out)
{
    const std::size_t d = shape.dim;
    std::size_t off_n = 0;
    std::size_t size_n = 1;
    for (std::size_t n = 0; n <= shape.depth; ++n) {
        std::size_t off_k = 0;
        std::size_t size_k = 1;
        for (std::size_t k = 0; k <= n; ++k) {
            const std::size_t size_r = size_n / size_k;
            const std::size_t off_r = shape.level_offset(n - k);
            for (std::size_t u = 0; u < size_k; ++u) {
                const double au = a[off_k + u];
                if (au == 0.0) continue;
                double* dst = out.data() + off_n + u * size_r;
                const double* src = b.data() + off_r;
                for (std::size_t v = 0; v < size_r; ++v) dst[v] += au * src[v];
            }
            off_k += size_k;
            size_k *= d;
        }
        off_n += size_n;
        size_n *= d;
    }
}

// Adjoint of mul_accumulate: given g = dL/d(a (x) b), accumulate dL/da and dL/db.
inline void mul_backward(TensorShape const& shape, std::span<const double> a, std::span<const double> b,
                         std::span<const double> g, std::span<double> ga, std::span<double> gb)
{
    const std::size_t d = shape.dim;
    std::size_t off_n = 0;
    std::size_t size_n = 1;
    for (std::size_t n = 0; n <= shape.depth; ++n) {
        std::size_t off_k = 0;
        std::size_t size_k = 1;
        for (std::size_t k = 0; k <= n; ++k) {
            const std::size_t size_r = size_n / size_k;
            const std::size_t off_r = shape.level_offset(n - k);
            for (std::size_t u = 0; u < size_k; ++u) {
                const double* gu = g.data() + off_n + u * size_r;
                const double au = a[off_k + u];
                double acc = 0.0;
                for (std::size_t v = 0; v < size_r; ++v) {
                    acc += gu[v] * b[off_r + v];
                    gb[off_r + v] += au * gu[v];
                }
                ga[off_k + u] += acc;
            }
            off_k += size_k;
            size_k *= d;
        }
        off_n += size_n;
        size_n *= d;
    }
}

// out = exp(inc): level n holds inc^{(x)n} / n!.
inline void exp_into(TensorShape const& shape, std::span<const double> inc, std::span<double> out)
{
    const std::size_t d = shape.dim;
    out[0] = 1.0;
    std::size_t prev_off = 0;
    std::size_t prev_size = 1;
    for (std::size_t n = 1; n <= shape.depth; ++n) {
        const std::size_t off = prev_off + prev_size;
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t u = 0; u < prev_size; ++u) {
            const double pu = out[prev_off + u] * inv_n;
            for (std::size_t i = 0; i < d; ++i) out[off + u * d + i] = pu * inc[i];
        }
        prev_off = off;
        prev_size *= d;
    }
}

// Adjoint of exp_into. `value` is the forward result; g is dL/dvalue and is
// consumed as scratch (overwritten).
inline void exp_backward(TensorShape const& shape, std::span<const double> inc, std::span<const double> value,
                         std::span<double> g, std::span<double> ginc)
{
    const std::size_t d = shape.dim;
    for (std::size_t n = shape.depth; n >= 1; --n) {
        const std::size_t off = shape.level_offset(n);
        const std::size_t prev_off = shape.level_offset(n - 1);
        const std::size_t prev_size = shape.level_size(n - 1);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t u = 0; u < prev_size; ++u) {
            const double pu = value[prev_off + u];
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double gi = g[off + u * d + i] * inv_n;
                acc += gi * inc[i];
                ginc[i] += gi * pu;
            }
            g[prev_off + u] += acc;
        }
    }
}

} // namespace kernels

// Element of T^N(R^d) with a flat level-major coefficient array.
class TruncatedTensor {
public:
    TruncatedTensor() = default;
    TruncatedTensor(TensorShape shape, std::vector<double> coeffs) : shape_(shape), coeffs_(std::move(coeffs))
    {
        if (shape_.dim < 1) throw std::invalid_argument("TruncatedTensor: dim must be >= 1");
        if (coeffs_.size() != shape_.size()) {
            throw std::invalid_argument("TruncatedTensor: expected " + std::to_string(shape_.size()) +
                                        " coefficients, got " + std::to_string(coeffs_.size()));
        }
        for (double c : coeffs_) {
            if (!std::isfinite(c)) throw std::invalid_argument("TruncatedTensor: non-finite coefficient");
        }
    }

    static TruncatedTensor zero(std::size_t dim, std::size_t depth)
    {
        auto shape = make_shape(dim, depth);
        return TruncatedTensor(shape, std::vector<double>(shape.size(), 0.0));
    }
    static TruncatedTensor unit(std::size_t dim, std::size_t depth)
    {
        auto t = zero(dim, depth);
        t.coeffs_[0] = 1.0;
        return t;
    }

    TensorShape const& shape() const noexcept { return shape_; }
    std::size_t dim() const noexcept { return shape_.dim; }
    std::size_t depth() const noexcept { return shape_.depth; }
    std::size_t size() const noexcept { return coeffs_.size(); }

    std::vector<double> const& coeffs() const noexcept { return coeffs_; }
    std::span<const double> level(std::size_t k) const
    {
        return std::span<const double>(coeffs_).subspan(shape_.level_offset(k), shape_.level_size(k));
    }
    double operator[](std::size_t i) const { return coeffs_[i]; }

    // Coefficient of a word given as 0-based letters.
    double word(std::span<const std::size_t> letters) const
    {
        std::size_t idx = 0;
        for (auto l : letters) idx = idx * shape_.dim + l;
        return coeffs_[shape_.level_offset(letters.size()) + idx];
    }

private:
    friend TruncatedTensor add(TruncatedTensor const&, TruncatedTensor const&);
    friend TruncatedTensor scale(TruncatedTensor const&, double);
    friend TruncatedTensor tensor_mul(TruncatedTensor const&, TruncatedTensor const&);
    friend TruncatedTensor tensor_exp(std::span<const double>, std::size_t);

    TensorShape shape_{};
    std::vector<double> coeffs_;
};

inline void check_same_shape(TruncatedTensor const& a, TruncatedTensor const& b, char const* what)
{
    if (!(a.shape() == b.shape())) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch (d=" + std::to_string(a.dim()) +
                                    ",N=" + std::to_string(a.depth()) + ") vs (d=" + std::to_string(b.dim()) +
                                    ",N=" + std::to_string(b.depth()) + ")");
    }
}

inline TruncatedTensor add(TruncatedTensor const& a, TruncatedTensor const& b)
{
    check_same_shape(a, b, "add");
    TruncatedTensor r = a;
    for (std::size_t i = 0; i < r.coeffs_.size(); ++i) r.coeffs_[i] += b.coeffs_[i];
    return r;
}

inline TruncatedTensor scale(TruncatedTensor const& a, double c)
{
    TruncatedTensor r = a;
    for (auto& x : r.coeffs_) x *= c;
    return r;
}

inline TruncatedTensor tensor_mul(TruncatedTensor const& a, TruncatedTensor const& b)
{
    check_same_shape(a, b, "tensor_mul");
    TruncatedTensor r = TruncatedTensor::zero(a.dim(), a.depth());
    kernels::mul_accumulate(a.shape(), a.coeffs_, b.coeffs_, r.coeffs_);
    return r;
}

inline TruncatedTensor tensor_exp(std::span<const double> increment, std::size_t depth)
{
    TruncatedTensor r = TruncatedTensor::zero(increment.size(), depth);
    kernels::exp_into(r.shape(), increment, r.coeffs_);
    return r;
}

inline double l2_norm(TruncatedTensor const& a)
{
    double s = 0.0;
    for (double x : a.coeffs()) s += x * x;
    return std::sqrt(s);
}

inline double l2_distance(TruncatedTensor const& a, TruncatedTensor const& b)
{
    check_same_shape(a, b, "l2_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return std::sqrt(s);
}

inline TruncatedTensor operator+(TruncatedTensor const& a, TruncatedTensor const& b) { return add(a, b); }
inline TruncatedTensor operator*(TruncatedTensor const& a, TruncatedTensor const& b) { return tensor_mul(a, b); }

} // namespace csigwgan
