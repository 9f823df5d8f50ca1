#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "autodiff.hpp"
#include "generator.hpp"
#include "nn.hpp"
#include "paths.hpp"
#include "rng.hpp"
#include "sde.hpp"
#include "signature.hpp"

namespace csigwgan {

// --- signature features and targets ---------------------------------------

// Signature of the time-augmented observation path on [0, s].
inline TruncatedTensor feature_signature(PiecewiseLinearPath const& y_path, std::size_t depth, double s)
{
    auto restricted = std::abs(y_path.end_time() - s) <= 1e-12 && std::abs(y_path.start_time()) <= 1e-12
                          ? y_path
                          : restrict(y_path, 0.0, s);
    return path_signature(time_augment(restricted), depth);
}

// Signature of the time-augmented signal path on [s, t].
inline TruncatedTensor target_signature(PiecewiseLinearPath const& x_path, std::size_t depth, double s, double t,
                                        Basepoint basepoint)
{
    return path_signature(time_augment(restrict(x_path, s, t)), depth, basepoint);
}

struct RegressionOptions {
    std::size_t depth = 4;
    double s = 0.5;
    double t = 1.0;
    // Ridge strength. With `relative` it multiplies trace(Phi^T Phi)/M_Y.
    double ridge = 1e-6;
    bool relative = true;
    Basepoint target_basepoint = Basepoint::origin;
};

// Linear map from observation signatures on [0, s] to signal signatures on
// [s, t]: prediction = weight * features.
struct SigRegression {
    Matrix weight;  // M_X x M_Y
    double lambda = 0.0;
    std::size_t depth = 4;
    double s = 0.5;
    double t = 1.0;
    std::size_t x_dim = 1;
    std::size_t y_dim = 1;
    Basepoint target_basepoint = Basepoint::origin;

    TensorShape feature_shape() const { return make_shape(y_dim + 1, depth); }
    TensorShape target_shape() const { return make_shape(x_dim + 1, depth); }
};

struct RegressionDesign {
    Eigen::MatrixXd features;  // m x M_Y
    Eigen::MatrixXd targets;   // m x M_X
};

inline RegressionDesign regression_design(Dataset const& ds, std::span<const std::size_t> indices,
                                          RegressionOptions const& opt)
{
    if (indices.empty()) throw std::invalid_argument("fit_regression: empty dataset");
    if (!(opt.s < opt.t)) throw std::invalid_argument("fit_regression: need s < t");
    (void)ds.partition.index_of(opt.s);
    (void)ds.partition.index_of(opt.t);
    const auto my = make_shape(ds.dim_y + 1, opt.depth).size();
    const auto mx = make_shape(ds.dim_x + 1, opt.depth).size();
    RegressionDesign d{Eigen::MatrixXd(indices.size(), my), Eigen::MatrixXd(indices.size(), mx)};
    for (std::size_t r = 0; r < indices.size(); ++r) {
        auto const& tr = ds.trajectories.at(indices[r]);
        auto f = feature_signature(tr.y_path(ds.partition), opt.depth, opt.s);
        auto g = target_signature(tr.x_path(ds.partition), opt.depth, opt.s, opt.t, opt.target_basepoint);
        for (std::size_t c = 0; c < my; ++c) d.features(r, c) = f[c];
        for (std::size_t c = 0; c < mx; ++c) d.targets(r, c) = g[c];
    }
    return d;
}

// Ridge least squares  min_W sum_j |T_j - W Phi_j|^2 + lambda |W|_F^2  via the
// normal equations, with one step of iterative refinement.
inline SigRegression fit_regression(Dataset const& ds, std::span<const std::size_t> indices, RegressionOptions const& opt)
{
    auto design = regression_design(ds, indices, opt);
    Eigen::MatrixXd gram = design.features.transpose() * design.features;
    const double lambda = opt.relative ? opt.ridge * gram.trace() / double(gram.rows()) : opt.ridge;
    if (lambda < 0.0 || !std::isfinite(lambda)) throw std::invalid_argument("fit_regression: ridge must be >= 0");
    Eigen::MatrixXd normal = gram;
    normal.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-15) {
        throw std::runtime_error("fit_regression: normal matrix is singular" +
                                 std::string(lambda == 0.0 ? "; raise the ridge parameter lambda" : ""));
    }
    Eigen::MatrixXd rhs = design.features.transpose() * design.targets;  // M_Y x M_X
    Eigen::MatrixXd wt = ldlt.solve(rhs);
    wt += ldlt.solve(rhs - normal * wt);

    SigRegression reg;
    reg.lambda = lambda;
    reg.depth = opt.depth;
    reg.s = opt.s;
    reg.t = opt.t;
    reg.x_dim = ds.dim_x;
    reg.y_dim = ds.dim_y;
    reg.target_basepoint = opt.target_basepoint;
    reg.weight = Matrix(wt.cols(), wt.rows());
    for (Eigen::Index i = 0; i < wt.cols(); ++i)
        for (Eigen::Index j = 0; j < wt.rows(); ++j) reg.weight(i, j) = wt(j, i);
    return reg;
}

inline SigRegression fit_regression(Dataset const& ds, RegressionOptions const& opt)
{
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit_regression(ds, all, opt);
}

// W Phi without the level-0 normalisation.
inline std::vector<double> predict_raw(SigRegression const& reg, TruncatedTensor const& features)
{
    if (!(features.shape() == reg.feature_shape()) || reg.weight.cols() != features.size()) {
        throw std::invalid_argument("predict: feature signature does not match the fitted depth/dimension");
    }
    std::vector<double> out(reg.weight.rows(), 0.0);
    for (std::size_t i = 0; i < reg.weight.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < reg.weight.cols(); ++j) acc += reg.weight(i, j) * features[j];
        out[i] = acc;
    }
    return out;
}

// Conditional expected signature of the signal on [s, t] given the
// observations on [0, s]. The level-0 slot is set to 1.
inline TruncatedTensor predict_conditional_signature(SigRegression const& reg, PiecewiseLinearPath const& y_path)
{
    if (y_path.end_time() < reg.s - 1e-12) throw std::invalid_argument("predict: observation path does not reach s");
    auto raw = predict_raw(reg, feature_signature(y_path, reg.depth, reg.s));
    raw[0] = 1.0;
    return TruncatedTensor(reg.target_shape(), std::move(raw));
}

// Mean squared residual sum_c (T_jc - (W Phi_j)_c)^2 averaged over samples.
inline double regression_residual(SigRegression const& reg, Dataset const& ds, std::span<const std::size_t> indices)
{
    if (indices.empty()) return 0.0;
    RegressionOptions opt{reg.depth, reg.s, reg.t, 0.0, false, reg.target_basepoint};
    auto design = regression_design(ds, indices, opt);
    Eigen::MatrixXd w(reg.weight.rows(), reg.weight.cols());
    for (std::size_t i = 0; i < reg.weight.rows(); ++i)
        for (std::size_t j = 0; j < reg.weight.cols(); ++j) w(i, j) = reg.weight(i, j);
    Eigen::MatrixXd res = design.targets - design.features * w.transpose();
    return res.squaredNorm() / double(indices.size());
}

// max |Phi^T (T - Phi W^T) - lambda W^T|, zero at the exact ridge solution.
inline double orthogonality_residual(SigRegression const& reg, Dataset const& ds, std::span<const std::size_t> indices)
{
    RegressionOptions opt{reg.depth, reg.s, reg.t, 0.0, false, reg.target_basepoint};
    auto design = regression_design(ds, indices, opt);
    Eigen::MatrixXd w(reg.weight.rows(), reg.weight.cols());
    for (std::size_t i = 0; i < reg.weight.rows(); ++i)
        for (std::size_t j = 0; j < reg.weight.cols(); ++j) w(i, j) = reg.weight(i, j);
    Eigen::MatrixXd res = design.targets - design.features * w.transpose();
    Eigen::MatrixXd g = design.features.transpose() * res - reg.lambda * w.transpose();
    return g.cwiseAbs().maxCoeff();
}

inline nlohmann::json to_json(SigRegression const& r)
{
    return {{"depth", r.depth},
            {"s", r.s},
            {"t", r.t},
            {"lambda", r.lambda},
            {"x_dim", r.x_dim},
            {"y_dim", r.y_dim},
            {"target_basepoint", r.target_basepoint == Basepoint::origin},
            {"rows", r.weight.rows()},
            {"cols", r.weight.cols()},
            {"weight", r.weight.values()}};
}

inline SigRegression regression_from_json(nlohmann::json const& j)
{
    SigRegression r;
    r.depth = j.at("depth").get<std::size_t>();
    r.s = j.at("s").get<double>();
    r.t = j.at("t").get<double>();
    r.lambda = j.at("lambda").get<double>();
    r.x_dim = j.at("x_dim").get<std::size_t>();
    r.y_dim = j.at("y_dim").get<std::size_t>();
    r.target_basepoint = j.at("target_basepoint").get<bool>() ? Basepoint::origin : Basepoint::none;
    r.weight = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                      j.at("weight").get<std::vector<double>>());
    return r;
}

// --- Sig-W1 loss ----------------------------------------------------------

inline void check_loss_config(SigRegression const& reg, GeneratorConfig const& c)
{
    if (std::abs(reg.s - c.s) > 1e-12 || std::abs(reg.t - c.t_end) > 1e-12) {
        throw std::invalid_argument("sig_w1_loss: regression and generator disagree on [s, t]");
    }
    if (reg.x_dim != c.sample_dim || reg.y_dim != c.obs_dim) {
        throw std::invalid_argument("sig_w1_loss: regression and generator disagree on dimensions");
    }
}

// Per-path Sig-W1 distances |pred_p - mean_i S(gen_{p,i})|_2 for a batch, as
// a [P x 1] tape node. `targets` is [P x M_X] (predicted conditional
// signatures); `z` is [P*N x d].
inline ad::Var sig_w1_batch(ad::Tape& tape, GeneratorVars const& g, GeneratorConfig const& c, SigRegression const& reg,
                            std::span<const Matrix> y_knots, Matrix const& targets, Matrix z)
{
    check_loss_config(reg, c);
    const std::size_t n = c.mc_samples;
    ad::Var latent = encode_batch(tape, g, c, y_knots);
    auto states = sample_batch(tape, g, c, latent, std::move(z), n);
    std::vector<double> times(c.partition.times().begin() + std::ptrdiff_t(c.s_index()),
                              c.partition.times().begin() + std::ptrdiff_t(c.end_index()) + 1);
    ad::Var sigs = signature_batch(tape, states, times, reg.depth, reg.target_basepoint);
    if (tape.value(sigs).cols() != targets.cols()) throw std::invalid_argument("sig_w1_loss: signature length mismatch");
    ad::Var expected = ad::group_mean_rows(sigs, n);
    return ad::row_norms(expected - tape.constant(targets));
}

// Sig-W1 loss of one observation path, recorded on `tape` against the
// parameter handles in `g`.
inline ad::Var sig_w1_loss(ad::Tape& tape, GeneratorVars const& g, SigRegression const& reg, GeneratorConfig const& c,
                           PiecewiseLinearPath const& y_path, Rng& rng)
{
    auto pred = predict_conditional_signature(reg, y_path);
    auto knots = observation_knots(c, y_path);
    return ad::sum(sig_w1_batch(tape, g, c, reg, knots, Matrix::row(pred.coeffs()),
                                draw_noise(c.mc_samples, c.sample_dim, rng)));
}

inline double sig_w1_loss(SigRegression const& reg, GeneratorParams const& p, GeneratorConfig const& c,
                          PiecewiseLinearPath const& y_path, Rng& rng)
{
    ad::Tape tape;
    auto g = bind(tape, p, false);
    return tape.scalar(sig_w1_loss(tape, g, reg, c, y_path, rng));
}

// --- training -------------------------------------------------------------

enum class Optimizer { adam, sgd };

struct TrainOptions {
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    double ridge = 1e-6;  // relative, see RegressionOptions
    std::size_t depth = 4;
    Basepoint target_basepoint = Basepoint::origin;
    double validation_fraction = 0.1;
    std::size_t chunk = 8;  // paths per tape
    std::uint64_t seed = 7;
};

struct TrainReport {
    // Losses of the untrained generator; NaN when no epoch is run.
    double initial_loss = std::nan("");
    double initial_validation_loss = std::nan("");
    std::vector<double> epoch_loss;
    std::vector<double> validation_loss;
    double train_residual = 0.0;
    double validation_residual = 0.0;
    bool aborted = false;
    std::string abort_reason;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> validation_indices;
    SigRegression regression;
    GeneratorParams params;
};

// Observation knots 0..s_index of several trajectories stacked into [P x d'] rows.
inline std::vector<Matrix> stack_observations(Dataset const& ds, std::span<const std::size_t> idx, std::size_t s_index)
{
    std::vector<Matrix> knots(s_index + 1, Matrix(idx.size(), ds.dim_y));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        auto const& tr = ds.trajectories.at(idx[r]);
        for (std::size_t i = 0; i <= s_index; ++i)
            for (std::size_t c = 0; c < ds.dim_y; ++c) knots[i](r, c) = tr.y[i][c];
    }
    return knots;
}

inline Matrix stack_rows(std::span<const std::vector<double>> rows, std::span<const std::size_t> idx)
{
    Matrix m(idx.size(), rows[idx[0]].size());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[idx[r]][c];
    return m;
}

// Noise for trajectory `traj` under key (tag, a): N rows of dimension d.
inline Matrix path_noise(std::uint64_t seed, std::uint64_t tag, std::uint64_t a, std::uint64_t traj, std::size_t n, std::size_t d)
{
    auto rng = substream(seed, {tag, a, traj});
    return draw_noise(n, d, rng);
}

struct BatchResult {
    double loss_sum = 0.0;  // sum of per-path distances
    std::vector<Matrix> grads;
};

// Evaluates the summed Sig-W1 distance over `idx` chunk by chunk; when
// `with_grad`, also the gradient of (sum / grad_scale) w.r.t. all parameters.
inline BatchResult evaluate_batch(GeneratorParams const& params, GeneratorConfig const& c, SigRegression const& reg,
                                  Dataset const& ds, std::span<const std::vector<double>> predictions,
                                  std::span<const std::size_t> idx, std::size_t chunk, bool with_grad,
                                  double grad_scale, std::uint64_t seed, std::uint64_t tag, std::uint64_t key)
{
    BatchResult out;
    const std::size_t si = c.s_index();
    const std::size_t n = c.mc_samples;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        auto part = idx.subspan(start, std::min(chunk, idx.size() - start));
        ad::Tape tape;
        auto g = bind(tape, params, with_grad);
        auto knots = stack_observations(ds, part, si);
        Matrix targets = stack_rows(predictions, part);
        Matrix z(part.size() * n, c.sample_dim);
        for (std::size_t r = 0; r < part.size(); ++r) {
            auto zr = path_noise(seed, tag, key, part[r], n, c.sample_dim);
            std::copy(zr.values().begin(), zr.values().end(), z.values().begin() + std::ptrdiff_t(r * n * c.sample_dim));
        }
        ad::Var dist = sig_w1_batch(tape, g, c, reg, knots, targets, std::move(z));
        ad::Var total = ad::sum(dist);
        out.loss_sum += tape.scalar(total);
        if (with_grad) {
            tape.backward(ad::scale(total, 1.0 / grad_scale));
            auto vars = parameter_vars(g);
            if (out.grads.empty()) {
                for (auto v : vars) out.grads.push_back(tape.grad(v));
            } else {
                for (std::size_t k = 0; k < vars.size(); ++k) {
                    auto gk = tape.grad(vars[k]);
                    for (std::size_t i = 0; i < gk.size(); ++i) out.grads[k][i] += gk[i];
                }
            }
        }
    }
    return out;
}

inline void split_indices(std::size_t m, double validation_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                          std::vector<std::size_t>& validation)
{
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto rng = substream(seed, {stream::split});
    std::shuffle(perm.begin(), perm.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * double(m)));
    if (m >= 2) n_val = std::min(n_val, m - 1);
    else n_val = 0;
    validation.assign(perm.begin(), perm.begin() + std::ptrdiff_t(n_val));
    train.assign(perm.begin() + std::ptrdiff_t(n_val), perm.end());
    std::sort(validation.begin(), validation.end());
    std::sort(train.begin(), train.end());
}

inline bool all_finite(std::span<const Matrix> ms)
{
    for (auto const& m : ms)
        for (double x : m.values())
            if (!std::isfinite(x)) return false;
    return true;
}

// Progress callback: (epoch, mean train loss, validation loss). Epoch 0
// reports the untrained generator.
using EpochCallback = std::function<void(std::size_t, double, double)>;

// Step 1: ridge regression of target signatures on observation signatures
// over the training split. Step 2: minibatch optimisation of the mean Sig-W1
// distance between the regression output and the generator's Monte Carlo
// expected signature. Noise is redrawn for every step.
inline TrainReport train(Dataset const& ds, GeneratorConfig const& config, TrainOptions const& opt,
                         std::optional<GeneratorParams> initial = std::nullopt, EpochCallback on_epoch = {})
{
    config.validate();
    if (ds.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (!(ds.partition == config.partition)) throw std::invalid_argument("train: dataset partition does not match the config");
    if (ds.dim_x != config.sample_dim || ds.dim_y != config.obs_dim) {
        throw std::invalid_argument("train: dataset dimensions do not match the config");
    }
    if (opt.batch_size < 1 || opt.chunk < 1) throw std::invalid_argument("train: batch size and chunk must be >= 1");

    TrainReport rep;
    split_indices(ds.size(), opt.validation_fraction, opt.seed, rep.train_indices, rep.validation_indices);

    RegressionOptions ropt{opt.depth, config.s, config.t_end, opt.ridge, true, opt.target_basepoint};
    rep.regression = fit_regression(ds, rep.train_indices, ropt);
    rep.train_residual = regression_residual(rep.regression, ds, rep.train_indices);
    rep.validation_residual = regression_residual(rep.regression, ds, rep.validation_indices);

    if (initial) {
        check_compatible(*initial, config);
        rep.params = *initial;
    } else {
        auto rng = substream(opt.seed, {stream::init});
        rep.params = init_generator(config, rng);
    }
    if (opt.epochs == 0) return rep;

    // Regression outputs are fixed during step 2.
    std::vector<std::vector<double>> predictions(ds.size());
    auto predict_all = [&](std::span<const std::size_t> idx) {
        for (auto j : idx) {
            auto p = predict_conditional_signature(rep.regression, ds.trajectories[j].y_path(ds.partition));
            predictions[j] = p.coeffs();
        }
    };
    predict_all(rep.train_indices);
    predict_all(rep.validation_indices);

    auto validation_mean = [&] {
        if (rep.validation_indices.empty()) return 0.0;
        auto res = evaluate_batch(rep.params, config, rep.regression, ds, predictions, rep.validation_indices, opt.chunk,
                                  false, 1.0, opt.seed, stream::validation, 0);
        return res.loss_sum / double(rep.validation_indices.size());
    };
    rep.initial_loss = evaluate_batch(rep.params, config, rep.regression, ds, predictions, rep.train_indices, opt.chunk,
                                      false, 1.0, opt.seed, stream::initial, 0)
                           .loss_sum /
                       double(rep.train_indices.size());
    rep.initial_validation_loss = validation_mean();
    if (on_epoch) on_epoch(0, rep.initial_loss, rep.initial_validation_loss);

    AdamState adam;
    adam.lr = opt.lr;
    std::vector<std::size_t> order = rep.train_indices;
    for (std::size_t epoch = 0; epoch < opt.epochs && !rep.aborted; ++epoch) {
        auto shuffle_rng = substream(opt.seed, {stream::shuffle, epoch});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            std::span<const std::size_t> batch(order.data() + start, std::min(opt.batch_size, order.size() - start));
            auto res = evaluate_batch(rep.params, config, rep.regression, ds, predictions, batch, opt.chunk, true,
                                      double(batch.size()), opt.seed, stream::latent, epoch);
            if (!std::isfinite(res.loss_sum) || !all_finite(res.grads)) {
                rep.aborted = true;
                rep.abort_reason = "non-finite loss or gradient in epoch " + std::to_string(epoch + 1) +
                                   "; parameters kept at the last finite step";
                break;
            }
            loss_sum += res.loss_sum;
            auto params = rep.params.parameters();
            if (opt.optimizer == Optimizer::adam) adam_step(params, res.grads, adam);
            else sgd_step(params, res.grads, opt.lr);
        }
        if (rep.aborted) break;
        rep.epoch_loss.push_back(loss_sum / double(order.size()));
        const double val = validation_mean();
        rep.validation_loss.push_back(val);
        if (on_epoch) on_epoch(epoch + 1, rep.epoch_loss.back(), val);
    }
    return rep;
}

} // namespace csigwgan
