#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autodiff.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace csigwgan {

enum class Activation { identity, relu, tanh };

inline std::string to_string(Activation a)
{
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    }
    return "identity";
}

inline Activation activation_from_string(std::string const& s)
{
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

inline double activate(Activation a, double x)
{
    switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    }
    return x;
}

// y = act(W x + b) with W stored (out x in), b as a (1 x out) row.
struct DenseLayer {
    Matrix weight;
    Matrix bias;
    Activation activation = Activation::identity;

    std::size_t in() const noexcept { return weight.cols(); }
    std::size_t out() const noexcept { return weight.rows(); }
    bool operator==(DenseLayer const&) const = default;
};

struct Mlp {
    std::vector<DenseLayer> layers;

    std::size_t input_size() const { return layers.front().in(); }
    std::size_t output_size() const { return layers.back().out(); }
    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (auto const& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }
    bool operator==(Mlp const&) const = default;

    std::vector<double> forward(std::span<const double> input) const
    {
        if (layers.empty()) throw std::logic_error("Mlp::forward: no layers");
        if (input.size() != input_size()) {
            throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.size()) +
                                        " entries, expected " + std::to_string(input_size()));
        }
        std::vector<double> h(input.begin(), input.end());
        for (auto const& l : layers) {
            std::vector<double> next(l.out());
            for (std::size_t o = 0; o < l.out(); ++o) {
                double acc = l.bias[o];
                for (std::size_t i = 0; i < l.in(); ++i) acc += l.weight(o, i) * h[i];
                next[o] = activate(l.activation, acc);
            }
            h = std::move(next);
        }
        return h;
    }
};

// He-normal weights for ReLU layers, Glorot-normal otherwise; zero biases.
inline Mlp init_mlp(std::span<const std::size_t> sizes, std::span<const Activation> activations, Rng& rng)
{
    if (sizes.size() < 2) throw std::invalid_argument("init_mlp: need at least input and output sizes");
    if (activations.size() != sizes.size() - 1) {
        throw std::invalid_argument("init_mlp: expected " + std::to_string(sizes.size() - 1) + " activations");
    }
    Mlp net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t fan_in = sizes[l];
        const std::size_t fan_out = sizes[l + 1];
        if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("init_mlp: layer sizes must be >= 1");
        const double var = activations[l] == Activation::relu ? 2.0 / double(fan_in) : 2.0 / double(fan_in + fan_out);
        std::normal_distribution<double> dist(0.0, std::sqrt(var));
        DenseLayer layer{Matrix(fan_out, fan_in), Matrix(1, fan_out, 0.0), activations[l]};
        for (auto& w : layer.weight.values()) w = dist(rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline Mlp init_mlp(std::initializer_list<std::size_t> sizes, std::initializer_list<Activation> activations, Rng& rng)
{
    return init_mlp(std::span<const std::size_t>(sizes.begin(), sizes.size()),
                    std::span<const Activation>(activations.begin(), activations.size()), rng);
}

// Tape handles for the parameters of one Mlp, in layer order (weight, bias).
struct MlpVars {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
    std::vector<Activation> activations;
};

inline MlpVars bind(ad::Tape& tape, Mlp const& net, bool trainable = true)
{
    MlpVars v;
    for (auto const& l : net.layers) {
        v.weights.push_back(trainable ? tape.variable(l.weight) : tape.constant(l.weight));
        v.biases.push_back(trainable ? tape.variable(l.bias) : tape.constant(l.bias));
        v.activations.push_back(l.activation);
    }
    return v;
}

// Batched forward pass on the tape; rows of `input` are samples.
inline ad::Var forward(MlpVars const& net, ad::Var input)
{
    ad::Var h = input;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        h = ad::add_row(ad::matmul_nt(h, net.weights[l]), net.biases[l]);
        switch (net.activations[l]) {
        case Activation::identity: break;
        case Activation::relu: h = ad::relu(h); break;
        case Activation::tanh: h = ad::tanh(h); break;
        }
    }
    return h;
}

// --- optimizers -----------------------------------------------------------

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

inline void check_param_grads(std::span<Matrix* const> params, std::span<const Matrix> grads, char const* who)
{
    if (params.size() != grads.size()) throw std::invalid_argument(std::string(who) + ": parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(grads[i])) {
            throw std::invalid_argument(std::string(who) + ": shape mismatch at parameter " + std::to_string(i));
        }
    }
}

// Adam with bias correction; moments are created on the first call.
inline void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& st)
{
    check_param_grads(params, grads, "adam_step");
    if (st.m.empty()) {
        for (auto* p : params) {
            st.m.emplace_back(p->rows(), p->cols(), 0.0);
            st.v.emplace_back(p->rows(), p->cols(), 0.0);
        }
    }
    if (st.m.size() != params.size()) throw std::invalid_argument("adam_step: optimizer state does not match parameters");
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, double(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k];
        auto const& g = grads[k];
        auto& m = st.m[k];
        auto& v = st.v[k];
        if (!m.same_shape(p)) throw std::invalid_argument("adam_step: moment shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
            const double mh = m[i] / c1;
            const double vh = v[i] / c2;
            p[i] -= st.lr * mh / (std::sqrt(vh) + st.eps);
        }
    }
}

inline void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr)
{
    check_param_grads(params, grads, "sgd_step");
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k]->size(); ++i) (*params[k])[i] -= lr * grads[k][i];
}

// --- checkpoint format ----------------------------------------------------

inline nlohmann::json to_json(Mlp const& net)
{
    nlohmann::json layers = nlohmann::json::array();
    for (auto const& l : net.layers) {
        layers.push_back({{"in", l.in()},
                          {"out", l.out()},
                          {"activation", to_string(l.activation)},
                          {"weight", l.weight.values()},
                          {"bias", l.bias.values()}});
    }
    return nlohmann::json{{"layers", layers}};
}

inline Mlp mlp_from_json(nlohmann::json const& j)
{
    Mlp net;
    for (auto const& jl : j.at("layers")) {
        const auto in = jl.at("in").get<std::size_t>();
        const auto out = jl.at("out").get<std::size_t>();
        DenseLayer l{Matrix(out, in, jl.at("weight").get<std::vector<double>>()),
                     Matrix(1, out, jl.at("bias").get<std::vector<double>>()),
                     activation_from_string(jl.at("activation").get<std::string>())};
        net.layers.push_back(std::move(l));
    }
    for (std::size_t i = 1; i < net.layers.size(); ++i) {
        if (net.layers[i].in() != net.layers[i - 1].out()) throw std::invalid_argument("mlp_from_json: layer shapes do not compose");
    }
    if (net.layers.empty()) throw std::invalid_argument("mlp_from_json: no layers");
    return net;
}

} // namespace csigwgan
