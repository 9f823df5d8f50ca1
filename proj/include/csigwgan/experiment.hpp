#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "generator.hpp"
#include "kalman.hpp"
#include "sde.hpp"
#include "sigw1.hpp"

// Pipeline used by the command-line tool: dataset generation, training and
// evaluation against the Kalman oracle on the linear benchmark.
namespace csigwgan {

struct RunConfig {
    std::string preset = "eq14-desk";
    std::string system = "eq14";
    double horizon = 1.0;
    std::size_t knots = 101;
    std::size_t m = 2000;
    std::uint64_t seed = 7;

    // generator
    std::size_t latent_dim = 10;
    std::size_t init_hidden = 20;
    std::size_t field_hidden = 128;
    double s = 0.5;
    double t_end = 1.0;
    std::size_t mc_train = 32;
    std::size_t mc_eval = 200;
    Coupling coupling = Coupling::current_state;

    // training
    std::size_t epochs = 25;
    std::size_t batch = 32;
    double lr = 1e-3;
    std::string optimizer = "adam";
    // Tuned for eq14 at m = 2000: the library defaults (ridge 1e-6, batch
    // 128) underfit the generator in 25 epochs.
    double ridge = 1.0;
    std::size_t depth = 4;
    bool basepoint = true;
    double validation_fraction = 0.1;
    std::size_t chunk = 8;

    // evaluation
    std::size_t n_test = 1000;
    std::size_t plot_trajectories = 5;

    std::string out = "out";
    std::string dataset;     // dataset stem (<stem>.csv + <stem>.json); empty = simulate
    std::string checkpoint;  // empty = <out>/checkpoint.json
};

inline RunConfig preset_config(std::string const& name)
{
    RunConfig c;
    c.preset = name;
    if (name == "eq14") {
        c.m = 20000;
        c.epochs = 50;
    } else if (name == "eq14-desk") {
        c.m = 2000;
        c.epochs = 25;
    } else {
        throw std::invalid_argument("unknown preset '" + name + "' (expected eq14 | eq14-desk)");
    }
    return c;
}

inline nlohmann::json to_json(RunConfig const& c)
{
    return {{"preset", c.preset},
            {"system", c.system},
            {"horizon", c.horizon},
            {"knots", c.knots},
            {"m", c.m},
            {"seed", c.seed},
            {"latent_dim", c.latent_dim},
            {"init_hidden", c.init_hidden},
            {"field_hidden", c.field_hidden},
            {"s", c.s},
            {"t_end", c.t_end},
            {"mc_train", c.mc_train},
            {"mc_eval", c.mc_eval},
            {"coupling", to_string(c.coupling)},
            {"epochs", c.epochs},
            {"batch", c.batch},
            {"lr", c.lr},
            {"optimizer", c.optimizer},
            {"ridge", c.ridge},
            {"depth", c.depth},
            {"basepoint", c.basepoint},
            {"validation_fraction", c.validation_fraction},
            {"chunk", c.chunk},
            {"n_test", c.n_test},
            {"plot_trajectories", c.plot_trajectories}};
}

// Overlays the fields present in `j` onto `c`. Unknown keys are rejected.
inline void apply_json(RunConfig& c, nlohmann::json const& j)
{
    if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto const& k = it.key();
        auto const& v = it.value();
        try {
            if (k == "preset") { /* handled by the caller */ }
            else if (k == "system") c.system = v.get<std::string>();
            else if (k == "horizon") c.horizon = v.get<double>();
            else if (k == "knots") c.knots = v.get<std::size_t>();
            else if (k == "m") c.m = v.get<std::size_t>();
            else if (k == "seed") c.seed = v.get<std::uint64_t>();
            else if (k == "latent_dim") c.latent_dim = v.get<std::size_t>();
            else if (k == "init_hidden") c.init_hidden = v.get<std::size_t>();
            else if (k == "field_hidden") c.field_hidden = v.get<std::size_t>();
            else if (k == "s") c.s = v.get<double>();
            else if (k == "t_end") c.t_end = v.get<double>();
            else if (k == "mc_train") c.mc_train = v.get<std::size_t>();
            else if (k == "mc_eval") c.mc_eval = v.get<std::size_t>();
            else if (k == "coupling") c.coupling = coupling_from_string(v.get<std::string>());
            else if (k == "epochs") c.epochs = v.get<std::size_t>();
            else if (k == "batch") c.batch = v.get<std::size_t>();
            else if (k == "lr") c.lr = v.get<double>();
            else if (k == "optimizer") c.optimizer = v.get<std::string>();
            else if (k == "ridge") c.ridge = v.get<double>();
            else if (k == "depth") c.depth = v.get<std::size_t>();
            else if (k == "basepoint") c.basepoint = v.get<bool>();
            else if (k == "validation_fraction") c.validation_fraction = v.get<double>();
            else if (k == "chunk") c.chunk = v.get<std::size_t>();
            else if (k == "n_test") c.n_test = v.get<std::size_t>();
            else if (k == "plot_trajectories") c.plot_trajectories = v.get<std::size_t>();
            else if (k == "out") c.out = v.get<std::string>();
            else if (k == "dataset") c.dataset = v.get<std::string>();
            else if (k == "checkpoint") c.checkpoint = v.get<std::string>();
            else throw std::invalid_argument("unknown field");
        } catch (nlohmann::json::exception const& e) {
            throw std::invalid_argument("config." + k + ": " + e.what());
        } catch (std::invalid_argument const& e) {
            throw std::invalid_argument("config." + k + ": " + e.what());
        }
    }
}

inline Partition run_partition(RunConfig const& c) { return Partition::equidistant(c.horizon, c.knots); }

inline void validate(RunConfig const& c)
{
    auto fail = [](std::string const& field, std::string const& why) {
        throw std::invalid_argument("config." + field + ": " + why);
    };
    if (c.system != "eq14") fail("system", "unknown system '" + c.system + "' (only eq14 is built in)");
    if (!(c.horizon > 0.0)) fail("horizon", "must be positive");
    if (c.knots < 2) fail("knots", "must be >= 2");
    if (c.m < 1) fail("m", "must be >= 1");
    if (c.latent_dim < 1) fail("latent_dim", "must be >= 1");
    if (c.depth < 1 || c.depth > 6) fail("depth", "must be in 1..6");
    if (c.mc_train < 1) fail("mc_train", "must be >= 1");
    if (c.mc_eval < 1) fail("mc_eval", "must be >= 1");
    if (c.batch < 1) fail("batch", "must be >= 1");
    if (c.chunk < 1) fail("chunk", "must be >= 1");
    if (!(c.lr > 0.0)) fail("lr", "must be positive");
    if (c.ridge < 0.0) fail("ridge", "must be >= 0");
    if (c.optimizer != "adam" && c.optimizer != "sgd") fail("optimizer", "expected adam | sgd");
    if (c.validation_fraction < 0.0 || c.validation_fraction >= 1.0) fail("validation_fraction", "must be in [0, 1)");
    if (!(c.s < c.t_end)) fail("s", "must be smaller than t_end");
    auto part = run_partition(c);
    try {
        (void)part.index_of(c.s);
    } catch (std::invalid_argument const&) {
        fail("s", "is not a partition point");
    }
    try {
        (void)part.index_of(c.t_end);
    } catch (std::invalid_argument const&) {
        fail("t_end", "is not a partition point");
    }
}

inline GeneratorConfig generator_config(RunConfig const& c, std::size_t mc_samples)
{
    GeneratorConfig g;
    g.latent_dim = c.latent_dim;
    g.sample_dim = 1;
    g.obs_dim = 1;
    g.s = c.s;
    g.t_end = c.t_end;
    g.partition = run_partition(c);
    g.enc_init = {{c.init_hidden}, Activation::relu};
    g.dec_init = {{c.init_hidden}, Activation::relu};
    g.enc_field = {{c.field_hidden}, Activation::tanh};
    g.dec_field = {{c.field_hidden}, Activation::tanh};
    g.mc_samples = mc_samples;
    g.coupling = c.coupling;
    return g;
}

inline TrainOptions train_options(RunConfig const& c)
{
    TrainOptions o;
    o.epochs = c.epochs;
    o.batch_size = c.batch;
    o.lr = c.lr;
    o.optimizer = c.optimizer == "sgd" ? Optimizer::sgd : Optimizer::adam;
    o.ridge = c.ridge;
    o.depth = c.depth;
    o.target_basepoint = c.basepoint ? Basepoint::origin : Basepoint::none;
    o.validation_fraction = c.validation_fraction;
    o.chunk = c.chunk;
    o.seed = c.seed;
    return o;
}

inline SdeSystem make_system(RunConfig const& c)
{
    if (c.system == "eq14") return benchmark_system();
    throw std::invalid_argument("config.system: unknown system '" + c.system + "'");
}

inline std::filesystem::path out_path(RunConfig const& c, std::string const& name)
{
    return std::filesystem::path(c.out) / name;
}

inline void ensure_out_dir(RunConfig const& c)
{
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + c.out + "': " + ec.message());
}

// --- simulate -------------------------------------------------------------

inline Dataset run_simulate(RunConfig const& c)
{
    validate(c);
    ensure_out_dir(c);
    auto ds = generate_dataset(make_system(c), run_partition(c), c.m, c.seed);
    write_dataset(ds, out_path(c, "dataset").string());
    return ds;
}

// --- train ----------------------------------------------------------------

inline Dataset load_or_simulate(RunConfig const& c)
{
    if (c.dataset.empty()) return generate_dataset(make_system(c), run_partition(c), c.m, c.seed);
    auto ds = read_dataset(c.dataset);
    auto expect = run_partition(c);
    if (ds.partition.size() != expect.size() || std::abs(ds.partition.back() - expect.back()) > 1e-12) {
        throw std::invalid_argument("dataset '" + c.dataset + "' does not match the configured partition");
    }
    return ds;
}

inline std::string loss_trace_csv(TrainReport const& rep)
{
    std::string out = "epoch,mean_loss,val_residual\n";
    auto row = [&](std::size_t epoch, double loss, double val) {
        out += std::to_string(epoch);
        out += ',';
        append_number(out, loss);
        out += ',';
        append_number(out, val);
        out += '\n';
    };
    // Row 0 is the untrained generator, present once training started.
    if (std::isfinite(rep.initial_loss)) row(0, rep.initial_loss, rep.initial_validation_loss);
    for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) row(e + 1, rep.epoch_loss[e], rep.validation_loss[e]);
    return out;
}

inline nlohmann::json checkpoint_json(RunConfig const& c, GeneratorConfig const& g, Dataset const& ds, TrainReport const& rep)
{
    return {{"format", "csigwgan-checkpoint-1"},
            {"run", to_json(c)},
            {"generator", to_json(g)},
            {"dataset", {{"system", ds.system}, {"seed", ds.seed}, {"first_id", ds.first_id}, {"m", ds.size()}}},
            {"split", {{"train", rep.train_indices.size()}, {"validation", rep.validation_indices}}},
            {"regression", to_json(rep.regression)},
            {"params", to_json(rep.params)}};
}

inline nlohmann::json train_report_json(RunConfig const& c, TrainReport const& rep)
{
    auto initial = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
    return {{"initial_loss", initial(rep.initial_loss)},
            {"initial_validation_loss", initial(rep.initial_validation_loss)},
            {"epoch_loss", rep.epoch_loss},
            {"validation_loss", rep.validation_loss},
            {"regression_residual", {{"train", rep.train_residual}, {"validation", rep.validation_residual}}},
            {"aborted", rep.aborted},
            {"abort_reason", rep.abort_reason},
            {"seed", c.seed},
            {"checkpoint", out_path(c, "checkpoint.json").string()},
            {"config", to_json(c)}};
}

inline TrainReport run_train(RunConfig const& c, EpochCallback on_epoch = {})
{
    validate(c);
    ensure_out_dir(c);
    auto ds = load_or_simulate(c);
    auto g = generator_config(c, c.mc_train);
    g.partition = ds.partition;
    auto rep = train(ds, g, train_options(c), std::nullopt, std::move(on_epoch));
    write_text_file(out_path(c, "checkpoint.json").string(), checkpoint_json(c, g, ds, rep).dump(1) + "\n");
    write_text_file(out_path(c, "loss_trace.csv").string(), loss_trace_csv(rep));
    write_text_file(out_path(c, "train_report.json").string(), train_report_json(c, rep).dump(2) + "\n");
    if (rep.aborted) std::cerr << "warning: training aborted: " << rep.abort_reason << "\n";
    return rep;
}

// --- evaluate -------------------------------------------------------------

struct Checkpoint {
    GeneratorConfig generator;
    GeneratorParams params;
    SigRegression regression;
    std::uint64_t dataset_seed = 0;
    std::uint64_t dataset_first_id = 0;
    std::size_t dataset_m = 0;
    std::string system;
};

inline Checkpoint read_checkpoint(std::string const& path)
{
    auto j = nlohmann::json::parse(read_text_file(path));
    if (j.value("format", "") != "csigwgan-checkpoint-1") throw std::runtime_error("'" + path + "' is not a checkpoint");
    Checkpoint ck;
    ck.generator = generator_config_from_json(j.at("generator"));
    ck.params = generator_params_from_json(j.at("params"));
    ck.regression = regression_from_json(j.at("regression"));
    ck.dataset_seed = j.at("dataset").at("seed").get<std::uint64_t>();
    ck.dataset_first_id = j.at("dataset").at("first_id").get<std::uint64_t>();
    ck.dataset_m = j.at("dataset").at("m").get<std::size_t>();
    ck.system = j.at("dataset").at("system").get<std::string>();
    check_compatible(ck.params, ck.generator);
    return ck;
}

struct EvalMetrics {
    double mse_at_s = 0.0;
    double mse_horizon = 0.0;
    double correlation_at_s = 0.0;
    double baseline_mse = 0.0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(EvalMetrics const& m)
{
    return {{"mse_at_s", m.mse_at_s},       {"mse_horizon", m.mse_horizon}, {"correlation_at_s", m.correlation_at_s},
            {"baseline_mse", m.baseline_mse}, {"n_test", m.n_test},         {"seed", m.seed}};
}

inline double pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: need two equal-length samples");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= double(a.size());
    mb /= double(b.size());
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Per-trajectory comparison on the full partition. Kalman columns hold the
// filter on [0, s] and the prediction from s afterwards; generator columns
// are defined on [s, t_end] only.
struct TrajectoryComparison {
    std::uint64_t id = 0;
    std::vector<double> times;
    std::vector<double> y, x;
    std::vector<double> kalman_mean, kalman_var;
    std::size_t s_index = 0;
    std::vector<double> gen_mean;                  // knots s..t_end
    std::vector<std::vector<double>> gen_samples;  // [sample][knot s..t_end]
};

// Produces generator Monte Carlo paths for one observation path.
using Estimator = std::function<McPaths(PiecewiseLinearPath const& y_path, std::size_t test_index)>;

inline std::vector<TrajectoryComparison> compare_with_kalman(Dataset const& test, GeneratorConfig const& g,
                                                             LinearSystem const& lin, Estimator const& estimator,
                                                             EvalMetrics& metrics)
{
    const std::size_t si = g.s_index();
    const std::size_t ei = g.end_index();
    std::vector<TrajectoryComparison> out;
    out.reserve(test.size());
    std::vector<double> gen_s, kal_s;
    double sq_s = 0.0, sq_h = 0.0;
    std::size_t n_h = 0;
    for (std::size_t j = 0; j < test.size(); ++j) {
        auto const& tr = test.trajectories[j];
        TrajectoryComparison tc;
        tc.id = test.first_id + j;
        tc.times = test.partition.times();
        tc.s_index = si;
        for (std::size_t k = 0; k < tc.times.size(); ++k) {
            tc.y.push_back(tr.y[k][0]);
            tc.x.push_back(tr.x[k][0]);
        }
        auto filt = kalman_filter(lin, std::span<const double>(tc.times).first(si + 1), std::span<const double>(tc.y).first(si + 1));
        for (auto const& st : filt) {
            tc.kalman_mean.push_back(st.mean);
            tc.kalman_var.push_back(st.var);
        }
        for (std::size_t k = si + 1; k < tc.times.size(); ++k) {
            auto p = kalman_predict(lin, filt.back(), tc.times[k]);
            tc.kalman_mean.push_back(p.mean);
            tc.kalman_var.push_back(p.var);
        }
        auto mc = estimator(tr.y_path(test.partition), j);
        if (mc.mean.size() != ei - si + 1) throw std::runtime_error("evaluate: estimator returned the wrong horizon");
        for (auto const& v : mc.mean) tc.gen_mean.push_back(v[0]);
        for (auto const& sample : mc.samples) {
            std::vector<double> row;
            for (auto const& v : sample) row.push_back(v[0]);
            tc.gen_samples.push_back(std::move(row));
        }
        gen_s.push_back(tc.gen_mean[0]);
        kal_s.push_back(tc.kalman_mean[si]);
        sq_s += (tc.gen_mean[0] - tc.kalman_mean[si]) * (tc.gen_mean[0] - tc.kalman_mean[si]);
        for (std::size_t k = 0; k < tc.gen_mean.size(); ++k) {
            const double e = tc.gen_mean[k] - tc.kalman_mean[si + k];
            sq_h += e * e;
            ++n_h;
        }
        out.push_back(std::move(tc));
    }
    const double n = double(test.size());
    double mk = 0.0;
    for (double v : kal_s) mk += v;
    mk /= n;
    double base = 0.0;
    for (double v : kal_s) base += (v - mk) * (v - mk);
    metrics.mse_at_s = sq_s / n;
    metrics.mse_horizon = sq_h / double(n_h);
    metrics.correlation_at_s = test.size() >= 2 ? pearson(gen_s, kal_s) : 0.0;
    metrics.baseline_mse = base / n;
    metrics.n_test = test.size();
    return out;
}

inline std::string trajectory_csv(TrajectoryComparison const& tc)
{
    std::string out = "t,y,x,kalman_mean,kalman_var,gen_mean";
    for (std::size_t i = 1; i <= tc.gen_samples.size(); ++i) out += ",gen_sample_" + std::to_string(i);
    out += '\n';
    for (std::size_t k = 0; k < tc.times.size(); ++k) {
        append_number(out, tc.times[k]);
        for (double v : {tc.y[k], tc.x[k], tc.kalman_mean[k], tc.kalman_var[k]}) {
            out += ',';
            append_number(out, v);
        }
        const bool has_gen = k >= tc.s_index && k - tc.s_index < tc.gen_mean.size();
        out += ',';
        if (has_gen) append_number(out, tc.gen_mean[k - tc.s_index]);
        for (auto const& sample : tc.gen_samples) {
            out += ',';
            if (has_gen) append_number(out, sample[k - tc.s_index]);
        }
        out += '\n';
    }
    return out;
}

inline std::string kalman_csv(TrajectoryComparison const& tc)
{
    std::string out = "t,kalman_mean,kalman_var\n";
    for (std::size_t k = 0; k < tc.times.size(); ++k) {
        append_number(out, tc.times[k]);
        out += ',';
        append_number(out, tc.kalman_mean[k]);
        out += ',';
        append_number(out, tc.kalman_var[k]);
        out += '\n';
    }
    return out;
}

// Numeric CSV with a header row; empty cells read as NaN.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t index(std::string const& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw std::out_of_range("csv: no column '" + name + "'");
    }

    std::vector<double> column(std::string const& name) const
    {
        const std::size_t i = index(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (auto const& r : rows) out.push_back(r[i]);
        return out;
    }
};

inline CsvTable parse_csv_table(std::string const& text)
{
    CsvTable t;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (line_no++ == 0) {
            for (auto c : cells) t.header.emplace_back(c);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw std::runtime_error("csv: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                     " cells, expected " + std::to_string(t.header.size()));
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) row.push_back(c.empty() ? std::nan("") : parse_number(c));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw std::runtime_error("csv: missing header");
    return t;
}

struct EvaluationResult {
    EvalMetrics metrics;
    std::vector<TrajectoryComparison> trajectories;
};

inline std::string checkpoint_path(RunConfig const& c)
{
    return c.checkpoint.empty() ? out_path(c, "checkpoint.json").string() : c.checkpoint;
}

// Held-out trajectories continue the id sequence of the training dataset, so
// they are driven by substreams no training trajectory used.
inline EvaluationResult run_evaluate(RunConfig const& c)
{
    validate(c);
    ensure_out_dir(c);
    auto ck = read_checkpoint(checkpoint_path(c));
    auto g = ck.generator;
    if (std::abs(g.s - c.s) > 1e-12 || std::abs(g.t_end - c.t_end) > 1e-12) {
        throw std::invalid_argument("evaluate: configured [s, t_end] does not match the checkpoint");
    }
    if (ck.regression.depth != c.depth) throw std::invalid_argument("evaluate: configured depth does not match the checkpoint");
    if (g.partition.size() != c.knots || std::abs(g.partition.back() - c.horizon) > 1e-12) {
        throw std::invalid_argument("evaluate: configured partition does not match the checkpoint");
    }
    g.mc_samples = c.mc_eval;
    g.coupling = c.coupling;
    auto test = generate_dataset(make_system(c), g.partition, c.n_test, ck.dataset_seed, ck.dataset_first_id + ck.dataset_m);

    EvaluationResult res;
    res.metrics.seed = c.seed;
    Estimator est = [&](PiecewiseLinearPath const& y, std::size_t j) {
        auto rng = substream(c.seed, {stream::evaluation, test.first_id + j});
        return mc_paths(ck.params, g, y, rng);
    };
    res.trajectories = compare_with_kalman(test, g, benchmark_linear_system(), est, res.metrics);

    write_text_file(out_path(c, "metrics.json").string(), to_json(res.metrics).dump(2) + "\n");
    for (std::size_t i = 0; i < std::min(c.plot_trajectories, res.trajectories.size()); ++i) {
        auto const& tc = res.trajectories[i];
        write_text_file(out_path(c, "trajectory_" + std::to_string(tc.id) + ".csv").string(), trajectory_csv(tc));
    }
    return res;
}

// evaluate, plus per-trajectory Kalman CSVs and a merged side-by-side table.
inline EvaluationResult run_compare(RunConfig const& c)
{
    auto res = run_evaluate(c);
    std::string merged = "traj_id,t,kalman_mean,kalman_var,gen_mean,abs_error\n";
    for (std::size_t i = 0; i < std::min(c.plot_trajectories, res.trajectories.size()); ++i) {
        auto const& tc = res.trajectories[i];
        write_text_file(out_path(c, "kalman_" + std::to_string(tc.id) + ".csv").string(), kalman_csv(tc));
        for (std::size_t k = tc.s_index; k < tc.times.size() && k - tc.s_index < tc.gen_mean.size(); ++k) {
            merged += std::to_string(tc.id);
            for (double v : {tc.times[k], tc.kalman_mean[k], tc.kalman_var[k], tc.gen_mean[k - tc.s_index],
                             std::abs(tc.gen_mean[k - tc.s_index] - tc.kalman_mean[k])}) {
                merged += ',';
                append_number(merged, v);
            }
            merged += '\n';
        }
    }
    write_text_file(out_path(c, "compare.csv").string(), merged);
    return res;
}

} // namespace csigwgan
