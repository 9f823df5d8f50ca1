#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace csigwgan {

// Strictly increasing set of time points. Partitions produced by
// Partition::equidistant start at 0; restricted paths carry a sub-partition
// on [a, b].
class Partition {
public:
    Partition() = default;
    explicit Partition(std::vector<double> times) : times_(std::move(times))
    {
        if (times_.empty()) throw std::invalid_argument("Partition: no points");
        for (std::size_t i = 0; i < times_.size(); ++i) {
            if (!std::isfinite(times_[i])) throw std::invalid_argument("Partition: non-finite time");
            if (i > 0 && !(times_[i] > times_[i - 1])) {
                throw std::invalid_argument("Partition: times not strictly increasing at index " +
                                            std::to_string(i));
            }
        }
    }

    // n points on [0, horizon] with step horizon/(n-1).
    static Partition equidistant(double horizon, std::size_t n)
    {
        if (n < 2) throw std::invalid_argument("Partition::equidistant: need at least 2 points");
        if (!(horizon > 0.0)) throw std::invalid_argument("Partition::equidistant: horizon must be positive");
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = horizon * static_cast<double>(i) / static_cast<double>(n - 1);
        t.back() = horizon;
        return Partition(std::move(t));
    }

    std::size_t size() const noexcept { return times_.size(); }
    double operator[](std::size_t i) const { return times_[i]; }
    double front() const { return times_.front(); }
    double back() const { return times_.back(); }
    std::vector<double> const& times() const noexcept { return times_; }

    // Index of the point equal to t within tol, or throws.
    std::size_t index_of(double t, double tol = 1e-9) const
    {
        auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
        if (it == times_.end() || std::abs(*it - t) > tol) {
            throw std::invalid_argument("Partition: time " + std::to_string(t) + " is not a partition point");
        }
        return static_cast<std::size_t>(it - times_.begin());
    }

    bool operator==(Partition const&) const = default;

private:
    std::vector<double> times_;
};

// Continuous path, linear between consecutive partition points.
class PiecewiseLinearPath {
public:
    PiecewiseLinearPath() = default;

    static PiecewiseLinearPath from_samples(std::vector<double> times, std::vector<std::vector<double>> values)
    {
        Partition part(std::move(times));
        return PiecewiseLinearPath(std::move(part), std::move(values));
    }

    // Scalar convenience overload.
    static PiecewiseLinearPath from_samples(std::vector<double> times, std::vector<double> const& values)
    {
        std::vector<std::vector<double>> v;
        v.reserve(values.size());
        for (double x : values) v.push_back({x});
        return from_samples(std::move(times), std::move(v));
    }

    PiecewiseLinearPath(Partition partition, std::vector<std::vector<double>> values, std::size_t time_channels = 0)
        : partition_(std::move(partition)), values_(std::move(values)), time_channels_(time_channels)
    {
        if (values_.size() != partition_.size()) {
            throw std::invalid_argument("PiecewiseLinearPath: " + std::to_string(values_.size()) +
                                        " values for " + std::to_string(partition_.size()) + " times");
        }
        dim_ = values_.front().size();
        if (dim_ == 0) throw std::invalid_argument("PiecewiseLinearPath: zero-dimensional values");
        for (auto const& v : values_) {
            if (v.size() != dim_) throw std::invalid_argument("PiecewiseLinearPath: ragged values");
            for (double x : v) {
                if (!std::isfinite(x)) throw std::invalid_argument("PiecewiseLinearPath: non-finite value");
            }
        }
    }

    Partition const& partition() const noexcept { return partition_; }
    std::vector<std::vector<double>> const& values() const noexcept { return values_; }
    std::vector<double> const& value(std::size_t i) const { return values_[i]; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t knots() const noexcept { return values_.size(); }
    double start_time() const { return partition_.front(); }
    double end_time() const { return partition_.back(); }
    std::size_t time_channels() const noexcept { return time_channels_; }

    std::vector<double> eval(double t) const
    {
        auto const& ts = partition_.times();
        if (t < ts.front() || t > ts.back()) {
            throw std::out_of_range("PiecewiseLinearPath::eval: t=" + std::to_string(t) + " outside [" +
                                    std::to_string(ts.front()) + ", " + std::to_string(ts.back()) + "]");
        }
        auto it = std::upper_bound(ts.begin(), ts.end(), t);
        if (it == ts.end()) return values_.back();
        const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
        const std::size_t lo = hi - 1;
        const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
        std::vector<double> out(dim_);
        for (std::size_t i = 0; i < dim_; ++i) out[i] = (1.0 - w) * values_[lo][i] + w * values_[hi][i];
        return out;
    }

private:
    Partition partition_;
    std::vector<std::vector<double>> values_;
    std::size_t dim_ = 0;
    std::size_t time_channels_ = 0;
};

// Prepends t as channel 0. Augmenting an already augmented path is allowed
// but reported on std::clog.
inline PiecewiseLinearPath time_augment(PiecewiseLinearPath const& p)
{
    if (p.time_channels() > 0) {
        std::clog << "warning: time_augment applied to a path that already has " << p.time_channels()
                  << " time channel(s)\n";
    }
    std::vector<std::vector<double>> v;
    v.reserve(p.knots());
    for (std::size_t i = 0; i < p.knots(); ++i) {
        std::vector<double> row;
        row.reserve(p.dim() + 1);
        row.push_back(p.partition()[i]);
        row.insert(row.end(), p.value(i).begin(), p.value(i).end());
        v.push_back(std::move(row));
    }
    return PiecewiseLinearPath(p.partition(), std::move(v), p.time_channels() + 1);
}

// Path on [a, b]; knots at a and b are inserted by interpolation when absent.
inline PiecewiseLinearPath restrict(PiecewiseLinearPath const& p, double a, double b, double tol = 1e-12)
{
    if (!(a < b)) throw std::invalid_argument("restrict: need a < b");
    if (a < p.start_time() - tol || b > p.end_time() + tol) {
        throw std::out_of_range("restrict: [" + std::to_string(a) + ", " + std::to_string(b) +
                                "] outside path domain");
    }
    auto const& ts = p.partition().times();
    std::vector<double> times;
    std::vector<std::vector<double>> vals;
    auto push = [&](double t, std::vector<double> v) {
        times.push_back(t);
        vals.push_back(std::move(v));
    };
    bool have_a = false;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (std::abs(ts[i] - a) <= tol) {
            push(ts[i], p.value(i));
            have_a = true;
            break;
        }
    }
    if (!have_a) push(a, p.eval(std::max(a, p.start_time())));
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] > a + tol && ts[i] < b - tol) push(ts[i], p.value(i));
    }
    bool have_b = false;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (std::abs(ts[i] - b) <= tol) {
            push(ts[i], p.value(i));
            have_b = true;
            break;
        }
    }
    if (!have_b) push(b, p.eval(std::min(b, p.end_time())));
    return PiecewiseLinearPath(Partition(std::move(times)), std::move(vals), p.time_channels());
}

// Joins p on [a, b] with q on [b, c].
inline PiecewiseLinearPath concat(PiecewiseLinearPath const& p, PiecewiseLinearPath const& q, double tol = 1e-12)
{
    if (p.dim() != q.dim()) throw std::invalid_argument("concat: dimension mismatch");
    if (std::abs(p.end_time() - q.start_time()) > tol) {
        throw std::invalid_argument("concat: junction time mismatch (" + std::to_string(p.end_time()) + " vs " +
                                    std::to_string(q.start_time()) + ")");
    }
    for (std::size_t i = 0; i < p.dim(); ++i) {
        if (std::abs(p.values().back()[i] - q.values().front()[i]) > tol) {
            throw std::invalid_argument("concat: junction value mismatch in channel " + std::to_string(i));
        }
    }
    std::vector<double> times = p.partition().times();
    std::vector<std::vector<double>> vals = p.values();
    auto const& qt = q.partition().times();
    times.insert(times.end(), qt.begin() + 1, qt.end());
    vals.insert(vals.end(), q.values().begin() + 1, q.values().end());
    return PiecewiseLinearPath(Partition(std::move(times)), std::move(vals), p.time_channels());
}

} // namespace csigwgan
