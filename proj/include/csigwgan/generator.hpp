#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autodiff.hpp"
#include "nn.hpp"
#include "paths.hpp"
#include "rng.hpp"
#include "signature.hpp"

namespace csigwgan {

// How the decoder field sees the state: G(u, X_s) with the state frozen at
// the conditioning time, or G(u, X_u) as in an ordinary ODE.
enum class Coupling { frozen_initial_state, current_state };

inline std::string to_string(Coupling c)
{
    return c == Coupling::frozen_initial_state ? "frozen" : "current";
}

inline Coupling coupling_from_string(std::string const& s)
{
    if (s == "frozen" || s == "frozen_initial_state") return Coupling::frozen_initial_state;
    if (s == "current" || s == "current_state") return Coupling::current_state;
    throw std::invalid_argument("unknown coupling '" + s + "' (expected frozen|current)");
}

// Hidden layers of one network block; the output layer is always linear.
struct HiddenSpec {
    std::vector<std::size_t> sizes;
    Activation activation = Activation::relu;
    bool operator==(HiddenSpec const&) const = default;
};

struct GeneratorConfig {
    std::size_t latent_dim = 10;  // k
    std::size_t sample_dim = 1;   // d, dimension of the signal and of z
    std::size_t obs_dim = 1;      // d'
    double s = 0.5;
    double t_end = 1.0;
    Partition partition = Partition::equidistant(1.0, 101);
    HiddenSpec enc_init{{20}, Activation::relu};
    HiddenSpec enc_field{{128}, Activation::tanh};
    HiddenSpec dec_init{{20}, Activation::relu};
    HiddenSpec dec_field{{128}, Activation::tanh};
    std::size_t mc_samples = 32;
    Coupling coupling = Coupling::current_state;

    std::size_t s_index() const { return partition.index_of(s); }
    std::size_t end_index() const { return partition.index_of(t_end); }

    void validate() const
    {
        if (latent_dim < 1) throw std::invalid_argument("generator config: latent_dim must be >= 1");
        if (sample_dim < 1 || obs_dim < 1) throw std::invalid_argument("generator config: dimensions must be >= 1");
        if (mc_samples < 1) throw std::invalid_argument("generator config: mc_samples must be >= 1");
        if (!(s < t_end)) throw std::invalid_argument("generator config: need s < t_end");
        (void)s_index();
        (void)end_index();
    }
};

inline nlohmann::json to_json(HiddenSpec const& h)
{
    return {{"hidden", h.sizes}, {"activation", to_string(h.activation)}};
}

inline HiddenSpec hidden_from_json(nlohmann::json const& j)
{
    return {j.at("hidden").get<std::vector<std::size_t>>(), activation_from_string(j.at("activation").get<std::string>())};
}

inline nlohmann::json to_json(GeneratorConfig const& c)
{
    return {{"latent_dim", c.latent_dim},
            {"sample_dim", c.sample_dim},
            {"obs_dim", c.obs_dim},
            {"s", c.s},
            {"t_end", c.t_end},
            {"horizon", c.partition.back()},
            {"knots", c.partition.size()},
            {"enc_init", to_json(c.enc_init)},
            {"enc_field", to_json(c.enc_field)},
            {"dec_init", to_json(c.dec_init)},
            {"dec_field", to_json(c.dec_field)},
            {"mc_samples", c.mc_samples},
            {"coupling", to_string(c.coupling)}};
}

inline GeneratorConfig generator_config_from_json(nlohmann::json const& j)
{
    GeneratorConfig c;
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.sample_dim = j.at("sample_dim").get<std::size_t>();
    c.obs_dim = j.at("obs_dim").get<std::size_t>();
    c.s = j.at("s").get<double>();
    c.t_end = j.at("t_end").get<double>();
    c.partition = Partition::equidistant(j.at("horizon").get<double>(), j.at("knots").get<std::size_t>());
    c.enc_init = hidden_from_json(j.at("enc_init"));
    c.enc_field = hidden_from_json(j.at("enc_field"));
    c.dec_init = hidden_from_json(j.at("dec_init"));
    c.dec_field = hidden_from_json(j.at("dec_field"));
    c.mc_samples = j.at("mc_samples").get<std::size_t>();
    c.coupling = coupling_from_string(j.at("coupling").get<std::string>());
    return c;
}

// The four trainable blocks:
//   enc_init  R^{d'}     -> R^k       initial latent state
//   enc_field R x R^k    -> R^{k x d'} CDE vector field, row-major
//   dec_init  R^k x R^d  -> R^d       initial sample from (latent, z)
//   dec_field R x R^d    -> R^d       ODE vector field
struct GeneratorParams {
    Mlp enc_init;
    Mlp enc_field;
    Mlp dec_init;
    Mlp dec_field;

    std::vector<Matrix*> parameters()
    {
        std::vector<Matrix*> out;
        for (Mlp* net : {&enc_init, &enc_field, &dec_init, &dec_field})
            for (auto& l : net->layers) {
                out.push_back(&l.weight);
                out.push_back(&l.bias);
            }
        return out;
    }
    bool operator==(GeneratorParams const&) const = default;
};

namespace detail {

inline Mlp init_block(std::size_t in, HiddenSpec const& h, std::size_t out, Rng& rng)
{
    std::vector<std::size_t> sizes{in};
    std::vector<Activation> acts;
    for (auto s : h.sizes) {
        sizes.push_back(s);
        acts.push_back(h.activation);
    }
    sizes.push_back(out);
    acts.push_back(Activation::identity);
    return init_mlp(sizes, acts, rng);
}

} // namespace detail

inline GeneratorParams init_generator(GeneratorConfig const& c, Rng& rng)
{
    GeneratorParams p;
    p.enc_init = detail::init_block(c.obs_dim, c.enc_init, c.latent_dim, rng);
    p.enc_field = detail::init_block(1 + c.latent_dim, c.enc_field, c.latent_dim * c.obs_dim, rng);
    p.dec_init = detail::init_block(c.latent_dim + c.sample_dim, c.dec_init, c.sample_dim, rng);
    p.dec_field = detail::init_block(1 + c.sample_dim, c.dec_field, c.sample_dim, rng);
    return p;
}

inline void check_compatible(GeneratorParams const& p, GeneratorConfig const& c)
{
    auto expect = [](Mlp const& m, std::size_t in, std::size_t out, char const* name) {
        if (m.layers.empty() || m.input_size() != in || m.output_size() != out) {
            throw std::invalid_argument(std::string("generator params: block ") + name + " has the wrong shape");
        }
    };
    expect(p.enc_init, c.obs_dim, c.latent_dim, "enc_init");
    expect(p.enc_field, 1 + c.latent_dim, c.latent_dim * c.obs_dim, "enc_field");
    expect(p.dec_init, c.latent_dim + c.sample_dim, c.sample_dim, "dec_init");
    expect(p.dec_field, 1 + c.sample_dim, c.sample_dim, "dec_field");
}

inline nlohmann::json to_json(GeneratorParams const& p)
{
    return {{"enc_init", to_json(p.enc_init)},
            {"enc_field", to_json(p.enc_field)},
            {"dec_init", to_json(p.dec_init)},
            {"dec_field", to_json(p.dec_field)}};
}

inline GeneratorParams generator_params_from_json(nlohmann::json const& j)
{
    return {mlp_from_json(j.at("enc_init")), mlp_from_json(j.at("enc_field")), mlp_from_json(j.at("dec_init")),
            mlp_from_json(j.at("dec_field"))};
}

// --- batched tape evaluation ------------------------------------------------

struct GeneratorVars {
    MlpVars enc_init, enc_field, dec_init, dec_field;
};

inline GeneratorVars bind(ad::Tape& tape, GeneratorParams const& p, bool trainable = true)
{
    return {bind(tape, p.enc_init, trainable), bind(tape, p.enc_field, trainable), bind(tape, p.dec_init, trainable),
            bind(tape, p.dec_field, trainable)};
}

// Tape handles of all parameters, in GeneratorParams::parameters() order.
inline std::vector<ad::Var> parameter_vars(GeneratorVars const& v)
{
    std::vector<ad::Var> out;
    for (MlpVars const* net : {&v.enc_init, &v.enc_field, &v.dec_init, &v.dec_field})
        for (std::size_t l = 0; l < net->weights.size(); ++l) {
            out.push_back(net->weights[l]);
            out.push_back(net->biases[l]);
        }
    return out;
}

// Euler scheme for the observation CDE over a batch of paths.
// y_knots[i] is [P x d'] holding Y at partition point i, for i = 0..s_index.
// Returns the latent state at s, [P x k].
inline ad::Var encode_batch(ad::Tape& tape, GeneratorVars const& g, GeneratorConfig const& c,
                            std::span<const Matrix> y_knots)
{
    const std::size_t si = c.s_index();
    if (y_knots.size() < si + 1) throw std::invalid_argument("encode: observation path does not cover [0, s]");
    const std::size_t rows = y_knots[0].rows();
    ad::Var state = forward(g.enc_init, tape.constant(y_knots[0]));
    for (std::size_t i = 0; i < si; ++i) {
        Matrix dy = y_knots[i + 1];
        for (std::size_t k = 0; k < dy.size(); ++k) dy[k] -= y_knots[i][k];
        ad::Var u = tape.constant(Matrix(rows, 1, c.partition[i]));
        ad::Var field = forward(g.enc_field, ad::concat_cols({u, state}));
        state = state + ad::rows_matvec(field, tape.constant(std::move(dy)));
    }
    return state;
}

// Euler scheme for the decoder ODE. `latent` is [P x k]; `z` is
// [P*samples x d] with the draws for latent row p in rows p*samples ...
// Returns the states at partition points s_index..end_index, each [P*samples x d].
inline std::vector<ad::Var> sample_batch(ad::Tape& tape, GeneratorVars const& g, GeneratorConfig const& c,
                                         ad::Var latent, Matrix z, std::size_t samples)
{
    const std::size_t si = c.s_index();
    const std::size_t ei = c.end_index();
    ad::Var lat = samples == 1 ? latent : ad::repeat_rows(latent, samples);
    const std::size_t rows = tape.value(lat).rows();
    if (z.rows() != rows || z.cols() != c.sample_dim) {
        throw std::invalid_argument("sample: noise has shape " + shape_string(z) + ", expected " +
                                    std::to_string(rows) + "x" + std::to_string(c.sample_dim));
    }
    ad::Var x0 = forward(g.dec_init, ad::concat_cols({lat, tape.constant(std::move(z))}));
    std::vector<ad::Var> states{x0};
    ad::Var x = x0;
    for (std::size_t i = si; i < ei; ++i) {
        const double dt = c.partition[i + 1] - c.partition[i];
        ad::Var u = tape.constant(Matrix(rows, 1, c.partition[i]));
        ad::Var arg = c.coupling == Coupling::current_state ? x : x0;
        ad::Var field = forward(g.dec_field, ad::concat_cols({u, arg}));
        x = x + ad::scale(field, dt);
        states.push_back(x);
    }
    return states;
}

// Signatures of the time-augmented polylines through `states` at `times`,
// one per row: [R x shape.size()] with shape (1 + d, depth).
inline ad::Var signature_batch(ad::Tape& tape, std::span<const ad::Var> states, std::span<const double> times,
                               std::size_t depth, Basepoint basepoint)
{
    if (states.size() != times.size() || states.empty()) throw std::invalid_argument("signature_batch: knot mismatch");
    const std::size_t rows = tape.value(states[0]).rows();
    const std::size_t d = tape.value(states[0]).cols();
    const TensorShape shape = make_shape(d + 1, depth);
    std::vector<ad::Var> incs;
    if (basepoint == Basepoint::origin) {
        incs.push_back(ad::concat_cols({tape.constant(Matrix(rows, 1, times[0])), states[0]}));
    }
    for (std::size_t j = 1; j < states.size(); ++j) {
        ad::Var dt = tape.constant(Matrix(rows, 1, times[j] - times[j - 1]));
        incs.push_back(ad::concat_cols({dt, states[j] - states[j - 1]}));
    }
    if (incs.empty()) throw std::invalid_argument("signature_batch: degenerate path with a single knot");
    ad::Var sig = ad::tensor_exp_rows(incs[0], shape);
    for (std::size_t j = 1; j < incs.size(); ++j) sig = ad::tensor_mul_rows(sig, ad::tensor_exp_rows(incs[j], shape), shape);
    return sig;
}

inline Matrix draw_noise(std::size_t rows, std::size_t cols, Rng& rng)
{
    Matrix z(rows, cols);
    for (auto& v : z.values()) v = standard_normal(rng);
    return z;
}

// Knot values of Y at partition points 0..s_index as P=1 batch inputs. The
// path must be sampled on the generator partition up to s; later knots are
// ignored.
inline std::vector<Matrix> observation_knots(GeneratorConfig const& c, PiecewiseLinearPath const& y_path)
{
    const std::size_t si = c.s_index();
    if (y_path.dim() != c.obs_dim) throw std::invalid_argument("encode: observation dimension mismatch");
    if (y_path.knots() < si + 1 || std::abs(y_path.start_time() - c.partition[0]) > 1e-9) {
        throw std::invalid_argument("encode: observation path does not cover [0, s]");
    }
    std::vector<Matrix> out;
    out.reserve(si + 1);
    for (std::size_t i = 0; i <= si; ++i) {
        if (std::abs(y_path.partition()[i] - c.partition[i]) > 1e-9) {
            throw std::invalid_argument("encode: observation knots are not on the generator partition");
        }
        out.push_back(Matrix::row(y_path.value(i)));
    }
    return out;
}

// --- single-path API ---------------------------------------------------------

inline std::vector<double> encode(GeneratorParams const& p, GeneratorConfig const& c, PiecewiseLinearPath const& y_path)
{
    ad::Tape tape;
    auto g = bind(tape, p, false);
    auto knots = observation_knots(c, y_path);
    return tape.value(encode_batch(tape, g, c, knots)).values();
}

// Generated path on [s, t_end] for one latent state and one noise draw.
inline PiecewiseLinearPath sample_path(GeneratorParams const& p, GeneratorConfig const& c,
                                       std::span<const double> latent, std::span<const double> z)
{
    if (latent.size() != c.latent_dim) throw std::invalid_argument("sample_path: latent dimension mismatch");
    for (double v : z) {
        if (!std::isfinite(v)) throw std::invalid_argument("sample_path: non-finite noise");
    }
    ad::Tape tape;
    auto g = bind(tape, p, false);
    auto states = sample_batch(tape, g, c, tape.constant(Matrix::row(latent)), Matrix::row(z), 1);
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    for (std::size_t i = 0; i < states.size(); ++i) {
        times.push_back(c.partition[c.s_index() + i]);
        values.push_back(tape.value(states[i]).values());
        for (double v : values.back()) {
            if (!std::isfinite(v)) throw std::runtime_error("sample_path: non-finite generator state");
        }
    }
    return PiecewiseLinearPath(Partition(std::move(times)), std::move(values));
}

// Monte Carlo output for one observation path: the mean path and the
// individual sample paths over partition points s..t_end.
struct McPaths {
    std::vector<double> times;
    std::vector<std::vector<double>> mean;                   // [knot][d]
    std::vector<std::vector<std::vector<double>>> samples;   // [sample][knot][d]
};

inline McPaths mc_paths(GeneratorParams const& p, GeneratorConfig const& c, PiecewiseLinearPath const& y_path, Rng& rng)
{
    ad::Tape tape;
    auto g = bind(tape, p, false);
    auto knots = observation_knots(c, y_path);
    ad::Var latent = encode_batch(tape, g, c, knots);
    const std::size_t n = c.mc_samples;
    auto states = sample_batch(tape, g, c, latent, draw_noise(n, c.sample_dim, rng), n);
    McPaths out;
    out.samples.assign(n, {});
    for (std::size_t i = 0; i < states.size(); ++i) {
        out.times.push_back(c.partition[c.s_index() + i]);
        auto const& v = tape.value(states[i]);
        std::vector<double> m(c.sample_dim, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            auto row = v.row_span(r);
            out.samples[r].emplace_back(row.begin(), row.end());
            for (std::size_t j = 0; j < c.sample_dim; ++j) m[j] += row[j];
        }
        for (auto& x : m) x /= static_cast<double>(n);
        out.mean.push_back(std::move(m));
    }
    return out;
}

// (1/N) sum_i phi(X^{z_i}_{t_end}) with z_i ~ N(0, I).
inline std::vector<double> mc_estimate(GeneratorParams const& p, GeneratorConfig const& c,
                                       PiecewiseLinearPath const& y_path,
                                       std::function<std::vector<double>(std::span<const double>)> const& phi, Rng& rng)
{
    auto paths = mc_paths(p, c, y_path, rng);
    std::vector<double> acc;
    for (auto const& sample : paths.samples) {
        auto v = phi(sample.back());
        if (acc.empty()) acc.assign(v.size(), 0.0);
        if (v.size() != acc.size()) throw std::invalid_argument("mc_estimate: test function changed output size");
        for (std::size_t j = 0; j < v.size(); ++j) acc[j] += v[j];
    }
    for (auto& x : acc) x /= static_cast<double>(paths.samples.size());
    return acc;
}

} // namespace csigwgan
