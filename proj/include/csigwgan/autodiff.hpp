#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "matrix.hpp"
#include "tensor_algebra.hpp"

// Reverse-mode automatic differentiation over dense matrices.
//
// Every operation appends one node to a Tape holding its forward value and a
// closure that pushes the node's adjoint to its parents. Nodes are created in
// topological order, so backward() is a single sweep over decreasing ids.
// A tape is used by one thread at a time; run independent tapes for
// independent work and add their gradients in a fixed order.
namespace csigwgan::ad {

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;
};

class Tape {
public:
    using Backprop = std::function<void(Tape&, std::size_t)>;

    Tape() = default;
    Tape(Tape const&) = delete;
    Tape& operator=(Tape const&) = delete;

    Var constant(Matrix value) { return push(std::move(value), false, {}); }
    Var variable(Matrix value) { return push(std::move(value), true, {}); }

    Matrix const& value(Var v) const { return nodes_.at(v.id).value; }
    double scalar(Var v) const
    {
        auto const& m = value(v);
        if (m.size() != 1) throw std::invalid_argument("Tape::scalar: node is " + shape_string(m));
        return m[0];
    }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Adjoint of a node after backward(); zero if the loss does not depend on it.
    Matrix grad(Var v) const
    {
        auto const& n = nodes_.at(v.id);
        if (n.grad.size() == 0) return Matrix(n.value.rows(), n.value.cols(), 0.0);
        return n.grad;
    }

    void backward(Var loss)
    {
        if (loss.tape != this || loss.id >= nodes_.size()) {
            throw std::logic_error("backward: loss node was not recorded on this tape");
        }
        if (nodes_[loss.id].value.size() != 1) {
            throw std::invalid_argument("backward: loss must be scalar, got " + shape_string(nodes_[loss.id].value));
        }
        for (auto& n : nodes_) n.grad = Matrix();
        if (!nodes_[loss.id].requires_grad) return;
        grad_ref(loss.id)[0] = 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (n.backprop && n.grad.size() != 0) n.backprop(*this, i);
        }
    }

    // Accumulator for node id, allocated on first use.
    Matrix& grad_ref(std::size_t id)
    {
        auto& n = nodes_[id];
        if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix(n.value.rows(), n.value.cols(), 0.0);
        return n.grad;
    }

    // Records an operation. `backprop` is kept only if a parent needs gradients.
    Var record(Matrix value, std::initializer_list<Var> parents, Backprop backprop)
    {
        bool rg = false;
        for (auto const& p : parents) {
            if (p.tape != this) throw std::logic_error("autodiff: operands live on different tapes");
            rg = rg || nodes_[p.id].requires_grad;
        }
        return push(std::move(value), rg, rg ? std::move(backprop) : Backprop{});
    }
    Var record(Matrix value, std::span<const Var> parents, Backprop backprop)
    {
        bool rg = false;
        for (auto const& p : parents) {
            if (p.tape != this) throw std::logic_error("autodiff: operands live on different tapes");
            rg = rg || nodes_[p.id].requires_grad;
        }
        return push(std::move(value), rg, rg ? std::move(backprop) : Backprop{});
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        Backprop backprop;
    };

    Var push(Matrix value, bool rg, Backprop bp)
    {
        nodes_.push_back(Node{std::move(value), Matrix(), rg, std::move(bp)});
        return Var{this, nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

inline MapC view(Matrix const& m) { return MapC(m.data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())); }
inline Map view(Matrix& m) { return Map(m.data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())); }

inline void require(bool ok, char const* op, std::string const& detail)
{
    if (!ok) throw std::invalid_argument(std::string(op) + ": " + detail);
}

// Adds g into parent's accumulator when the parent tracks gradients.
template <class F>
void accumulate(Tape& t, Var parent, F&& f)
{
    if (!t.requires_grad(parent.id)) return;
    f(t.grad_ref(parent.id));
}

} // namespace detail

inline Matrix const& value(Var v) { return v.tape->value(v); }

inline Var add(Var a, Var b)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    auto const& vb = t.value(b);
    detail::require(va.same_shape(vb), "add", shape_string(va) + " vs " + shape_string(vb));
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
        detail::accumulate(t, b, [&](Matrix& gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i]; });
    });
}

inline Var sub(Var a, Var b)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    auto const& vb = t.value(b);
    detail::require(va.same_shape(vb), "sub", shape_string(va) + " vs " + shape_string(vb));
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
        detail::accumulate(t, b, [&](Matrix& gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i]; });
    });
}

// Elementwise product.
inline Var hadamard(Var a, Var b)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    auto const& vb = t.value(b);
    detail::require(va.same_shape(vb), "hadamard", shape_string(va) + " vs " + shape_string(vb));
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        auto const& va = t.value(a);
        auto const& vb = t.value(b);
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i]; });
        detail::accumulate(t, b, [&](Matrix& gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i]; });
    });
}

inline Var scale(Var a, double c)
{
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return t.record(std::move(out), {a}, [a, c](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i]; });
    });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator-(Var a) { return scale(a, -1.0); }

// a [R x C] + row [1 x C] broadcast over rows.
inline Var add_row(Var a, Var row)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    auto const& vr = t.value(row);
    detail::require(vr.rows() == 1 && vr.cols() == va.cols(), "add_row", shape_string(va) + " + " + shape_string(vr));
    Matrix out = va;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += vr[c];
    return t.record(std::move(out), {a, row}, [a, row](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
        detail::accumulate(t, row, [&](Matrix& gr) {
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
        });
    });
}

inline Var matmul(Var a, Var b)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    auto const& vb = t.value(b);
    detail::require(va.cols() == vb.rows(), "matmul", shape_string(va) + " * " + shape_string(vb));
    Matrix out(va.rows(), vb.cols());
    detail::view(out).noalias() = detail::view(va) * detail::view(vb);
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) { detail::view(ga).noalias() += detail::view(g) * detail::view(t.value(b)).transpose(); });
        detail::accumulate(t, b, [&](Matrix& gb) { detail::view(gb).noalias() += detail::view(t.value(a)).transpose() * detail::view(g); });
    });
}

// a [R x K] * b^T with b [C x K]; the layout used for (out x in) weights.
inline Var matmul_nt(Var a, Var b)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    auto const& vb = t.value(b);
    detail::require(va.cols() == vb.cols(), "matmul_nt", shape_string(va) + " * (" + shape_string(vb) + ")^T");
    Matrix out(va.rows(), vb.rows());
    detail::view(out).noalias() = detail::view(va) * detail::view(vb).transpose();
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) { detail::view(ga).noalias() += detail::view(g) * detail::view(t.value(b)); });
        detail::accumulate(t, b, [&](Matrix& gb) { detail::view(gb).noalias() += detail::view(g).transpose() * detail::view(t.value(a)); });
    });
}

inline Var tanh(Var a)
{
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return t.record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        Var me{&t, self};
        auto const& y = t.value(me);
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]); });
    });
}

// max(x, 0); the subgradient at 0 is taken to be 0.
inline Var relu(Var a)
{
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return t.record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        auto const& x = t.value(a);
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < g.size(); ++i) if (x[i] > 0.0) ga[i] += g[i]; });
    });
}

inline Var sum(Var a)
{
    Tape& t = *a.tape;
    double s = 0.0;
    for (double x : t.value(a).values()) s += x;
    return t.record(Matrix(1, 1, s), {a}, [a](Tape& t, std::size_t self) {
        const double g = t.grad_ref(self)[0];
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g; });
    });
}

inline Var mean(Var a)
{
    const auto n = a.tape->value(a).size();
    detail::require(n > 0, "mean", "empty operand");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

// Euclidean norm over all entries, as a 1x1 node. The gradient at 0 is 0.
inline Var l2_norm(Var a)
{
    Tape& t = *a.tape;
    double s = 0.0;
    for (double x : t.value(a).values()) s += x * x;
    return t.record(Matrix(1, 1, std::sqrt(s)), {a}, [a](Tape& t, std::size_t self) {
        const double g = t.grad_ref(self)[0];
        const double n = t.value(Var{&t, self})[0];
        if (n == 0.0) return;
        auto const& x = t.value(a);
        detail::accumulate(t, a, [&](Matrix& ga) { for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * x[i] / n; });
    });
}

// Per-row Euclidean norms, [R x C] -> [R x 1].
inline Var row_norms(Var a)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    Matrix out(va.rows(), 1);
    for (std::size_t r = 0; r < va.rows(); ++r) {
        double s = 0.0;
        for (double x : va.row_span(r)) s += x * x;
        out[r] = std::sqrt(s);
    }
    return t.record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        auto const& n = t.value(Var{&t, self});
        auto const& x = t.value(a);
        detail::accumulate(t, a, [&](Matrix& ga) {
            for (std::size_t r = 0; r < x.rows(); ++r) {
                if (n[r] == 0.0) continue;
                const double f = g[r] / n[r];
                for (std::size_t c = 0; c < x.cols(); ++c) ga(r, c) += f * x(r, c);
            }
        });
    });
}

inline Var concat_cols(std::span<const Var> parts)
{
    detail::require(!parts.empty(), "concat_cols", "no operands");
    Tape& t = *parts.front().tape;
    const std::size_t rows = t.value(parts.front()).rows();
    std::size_t cols = 0;
    for (auto const& p : parts) {
        detail::require(t.value(p).rows() == rows, "concat_cols", "row count mismatch");
        cols += t.value(p).cols();
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (auto const& p : parts) {
        auto const& v = t.value(p);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) out(r, off + c) = v(r, c);
        off += v.cols();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return t.record(std::move(out), parts, [ps](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        std::size_t off = 0;
        for (auto const& p : ps) {
            const std::size_t pc = t.value(p).cols();
            detail::accumulate(t, p, [&](Matrix& gp) {
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < pc; ++c) gp(r, c) += g(r, off + c);
            });
            off += pc;
        }
    });
}

inline Var concat_cols(std::initializer_list<Var> parts)
{
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var slice_cols(Var a, std::size_t start, std::size_t count)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    detail::require(start + count <= va.cols(), "slice_cols", "range exceeds " + shape_string(va));
    Matrix out(va.rows(), count);
    for (std::size_t r = 0; r < va.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = va(r, start + c);
    return t.record(std::move(out), {a}, [a, start](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) {
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) ga(r, start + c) += g(r, c);
        });
    });
}

// Each row repeated `times` times consecutively: [R x C] -> [R*times x C].
inline Var repeat_rows(Var a, std::size_t times)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    detail::require(times >= 1, "repeat_rows", "times must be >= 1");
    Matrix out(va.rows() * times, va.cols());
    for (std::size_t r = 0; r < va.rows(); ++r)
        for (std::size_t k = 0; k < times; ++k)
            for (std::size_t c = 0; c < va.cols(); ++c) out(r * times + k, c) = va(r, c);
    return t.record(std::move(out), {a}, [a, times](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) {
            for (std::size_t r = 0; r < ga.rows(); ++r)
                for (std::size_t k = 0; k < times; ++k)
                    for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(r * times + k, c);
        });
    });
}

// Mean over consecutive blocks of `group` rows: [R*group x C] -> [R x C].
inline Var group_mean_rows(Var a, std::size_t group)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    detail::require(group >= 1 && va.rows() % group == 0, "group_mean_rows",
                    std::to_string(va.rows()) + " rows not divisible by " + std::to_string(group));
    const std::size_t rows = va.rows() / group;
    const double inv = 1.0 / static_cast<double>(group);
    Matrix out(rows, va.cols());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < group; ++k)
            for (std::size_t c = 0; c < va.cols(); ++c) out(r, c) += va(r * group + k, c);
    for (auto& x : out.values()) x *= inv;
    return t.record(std::move(out), {a}, [a, group, inv](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        detail::accumulate(t, a, [&](Matrix& ga) {
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t k = 0; k < group; ++k)
                    for (std::size_t c = 0; c < g.cols(); ++c) ga(r * group + k, c) += inv * g(r, c);
        });
    });
}

// Row-wise matrix-vector product. Row r of `fields` holds a (k x m) matrix in
// row-major order; row r of `vecs` holds an m-vector. Result is [R x k].
inline Var rows_matvec(Var fields, Var vecs)
{
    Tape& t = *fields.tape;
    auto const& f = t.value(fields);
    auto const& v = t.value(vecs);
    detail::require(f.rows() == v.rows() && v.cols() > 0 && f.cols() % v.cols() == 0, "rows_matvec",
                    shape_string(f) + " vs " + shape_string(v));
    const std::size_t m = v.cols();
    const std::size_t k = f.cols() / m;
    Matrix out(f.rows(), k);
    for (std::size_t r = 0; r < f.rows(); ++r)
        for (std::size_t i = 0; i < k; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += f(r, i * m + j) * v(r, j);
            out(r, i) = acc;
        }
    return t.record(std::move(out), {fields, vecs}, [fields, vecs, k, m](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        auto const& f = t.value(fields);
        auto const& v = t.value(vecs);
        detail::accumulate(t, fields, [&](Matrix& gf) {
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < m; ++j) gf(r, i * m + j) += g(r, i) * v(r, j);
        });
        detail::accumulate(t, vecs, [&](Matrix& gv) {
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < m; ++j) gv(r, j) += g(r, i) * f(r, i * m + j);
        });
    });
}

// Row-wise tensor exponential: increments [R x d] -> [R x shape.size()].
inline Var tensor_exp_rows(Var increments, TensorShape shape)
{
    Tape& t = *increments.tape;
    auto const& inc = t.value(increments);
    detail::require(inc.cols() == shape.dim, "tensor_exp_rows", "increment width " + std::to_string(inc.cols()) +
                                                                    " != dim " + std::to_string(shape.dim));
    const std::size_t m = shape.size();
    Matrix out(inc.rows(), m);
    for (std::size_t r = 0; r < inc.rows(); ++r) kernels::exp_into(shape, inc.row_span(r), out.row_span(r));
    return t.record(std::move(out), {increments}, [increments, shape, m](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        auto const& val = t.value(Var{&t, self});
        auto const& inc = t.value(increments);
        detail::accumulate(t, increments, [&](Matrix& gi) {
            std::vector<double> scratch(m);
            for (std::size_t r = 0; r < inc.rows(); ++r) {
                auto gr = g.row_span(r);
                std::copy(gr.begin(), gr.end(), scratch.begin());
                kernels::exp_backward(shape, inc.row_span(r), val.row_span(r), scratch, gi.row_span(r));
            }
        });
    });
}

// Row-wise truncated tensor product.
inline Var tensor_mul_rows(Var a, Var b, TensorShape shape)
{
    Tape& t = *a.tape;
    auto const& va = t.value(a);
    auto const& vb = t.value(b);
    detail::require(va.same_shape(vb) && va.cols() == shape.size(), "tensor_mul_rows",
                    shape_string(va) + " vs " + shape_string(vb));
    Matrix out(va.rows(), va.cols());
    for (std::size_t r = 0; r < va.rows(); ++r)
        kernels::mul_accumulate(shape, va.row_span(r), vb.row_span(r), out.row_span(r));
    return t.record(std::move(out), {a, b}, [a, b, shape](Tape& t, std::size_t self) {
        auto const& g = t.grad_ref(self);
        auto const& va = t.value(a);
        auto const& vb = t.value(b);
        const bool need_a = t.requires_grad(a.id);
        const bool need_b = t.requires_grad(b.id);
        Matrix sink_a, sink_b;
        Matrix& ga = need_a ? t.grad_ref(a.id) : (sink_a = Matrix(va.rows(), va.cols()));
        Matrix& gb = need_b ? t.grad_ref(b.id) : (sink_b = Matrix(vb.rows(), vb.cols()));
        for (std::size_t r = 0; r < va.rows(); ++r)
            kernels::mul_backward(shape, va.row_span(r), vb.row_span(r), g.row_span(r), ga.row_span(r), gb.row_span(r));
    });
}

} // namespace csigwgan::ad
