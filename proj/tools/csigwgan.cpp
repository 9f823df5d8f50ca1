// csigwgan: simulate | train | evaluate | compare
//
// Configuration precedence: command-line flags > --config JSON > --preset.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "csigwgan.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::string> preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> m;
    std::optional<std::size_t> epochs;
    std::optional<double> s;
    std::optional<double> t_end;
    std::optional<std::size_t> depth;
    std::optional<std::size_t> mc_samples;
    std::optional<std::string> out;
    std::optional<std::string> coupling;
    std::optional<std::string> dataset;
    std::optional<std::string> checkpoint;
    std::optional<std::size_t> n_test;
    std::optional<std::size_t> batch;
    std::optional<double> lr;
    std::optional<double> ridge;
    std::optional<std::string> optimizer;
    std::optional<std::size_t> plot;
    bool quiet = false;
};

void add_common(CLI::App* app, Overrides& o)
{
    app->add_option("--config", o.config, "JSON config file");
    app->add_option("--preset", o.preset, "eq14 | eq14-desk (default eq14-desk)");
    app->add_option("--seed", o.seed, "master seed");
    app->add_option("--m", o.m, "number of training trajectories");
    app->add_option("--epochs", o.epochs, "training epochs");
    app->add_option("--s", o.s, "filtering time s (a partition point)");
    app->add_option("--t-end", o.t_end, "prediction horizon end (a partition point)");
    app->add_option("--depth", o.depth, "signature truncation depth");
    app->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per path (training for train, evaluation otherwise)");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--coupling", o.coupling, "current | frozen");
    app->add_option("--dataset", o.dataset, "dataset stem written by simulate (train only; default: simulate in memory)");
    app->add_option("--checkpoint", o.checkpoint, "checkpoint path (default <out>/checkpoint.json)");
    app->add_option("--n-test", o.n_test, "held-out trajectories for evaluation");
    app->add_option("--batch", o.batch, "batch size");
    app->add_option("--lr", o.lr, "learning rate");
    app->add_option("--ridge", o.ridge, "ridge parameter relative to the mean Gram diagonal");
    app->add_option("--optimizer", o.optimizer, "adam | sgd");
    app->add_option("--plot-trajectories", o.plot, "number of per-trajectory CSVs to write");
    app->add_flag("--quiet", o.quiet, "suppress progress output");
}

csigwgan::RunConfig resolve(Overrides const& o, bool training)
{
    using namespace csigwgan;
    nlohmann::json file;
    if (!o.config.empty()) {
        try {
            file = nlohmann::json::parse(read_text_file(o.config));
        } catch (nlohmann::json::parse_error const& e) {
            throw std::invalid_argument("config '" + o.config + "': " + e.what());
        }
        if (!file.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
    }
    std::string preset = "eq14-desk";
    if (file.contains("preset")) preset = file.at("preset").get<std::string>();
    if (o.preset) preset = *o.preset;
    RunConfig c = preset_config(preset);
    if (!file.is_null()) apply_json(c, file);

    if (o.seed) c.seed = *o.seed;
    if (o.m) c.m = *o.m;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.s) c.s = *o.s;
    if (o.t_end) c.t_end = *o.t_end;
    if (o.depth) c.depth = *o.depth;
    if (o.mc_samples) (training ? c.mc_train : c.mc_eval) = *o.mc_samples;
    if (o.out) c.out = *o.out;
    if (o.coupling) c.coupling = coupling_from_string(*o.coupling);
    if (o.dataset) c.dataset = *o.dataset;
    if (o.checkpoint) c.checkpoint = *o.checkpoint;
    if (o.n_test) c.n_test = *o.n_test;
    if (o.batch) c.batch = *o.batch;
    if (o.lr) c.lr = *o.lr;
    if (o.ridge) c.ridge = *o.ridge;
    if (o.optimizer) c.optimizer = *o.optimizer;
    if (o.plot) c.plot_trajectories = *o.plot;
    validate(c);
    return c;
}

void print_metrics(csigwgan::EvalMetrics const& m)
{
    std::printf("mse_at_s %.6g\nmse_horizon %.6g\ncorrelation_at_s %.4f\nbaseline_mse %.6g\nn_test %zu\n", m.mse_at_s,
                m.mse_horizon, m.correlation_at_s, m.baseline_mse, m.n_test);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Conditional Sig-W1 generator for filtering and prediction"};
    app.require_subcommand(1);
    Overrides o;
    auto* sim = app.add_subcommand("simulate", "generate a trajectory dataset");
    auto* trn = app.add_subcommand("train", "fit the regression and train the generator");
    auto* evl = app.add_subcommand("evaluate", "score a checkpoint against the Kalman filter on held-out data");
    auto* cmp = app.add_subcommand("compare", "evaluate and write side-by-side Kalman/generator tables");
    for (auto* sub : {sim, trn, evl, cmp}) add_common(sub, o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            auto c = resolve(o, false);
            auto ds = csigwgan::run_simulate(c);
            std::printf("wrote %zu trajectories to %s\n", ds.size(), csigwgan::out_path(c, "dataset.csv").c_str());
        } else if (trn->parsed()) {
            auto c = resolve(o, true);
            csigwgan::EpochCallback cb;
            if (!o.quiet) {
                cb = [](std::size_t epoch, double loss, double val) {
                    std::fprintf(stderr, "epoch %zu loss %.6f val %.6f\n", epoch, loss, val);
                };
            }
            auto rep = csigwgan::run_train(c, cb);
            std::printf("regression residual train %.6g validation %.6g\n", rep.train_residual, rep.validation_residual);
            if (!rep.epoch_loss.empty()) {
                std::printf("loss initial %.6f first epoch %.6f last epoch %.6f\n", rep.initial_loss, rep.epoch_loss.front(),
                            rep.epoch_loss.back());
            }
            std::printf("checkpoint %s\n", csigwgan::out_path(c, "checkpoint.json").c_str());
            if (rep.aborted) return 3;
        } else if (evl->parsed()) {
            auto c = resolve(o, false);
            print_metrics(csigwgan::run_evaluate(c).metrics);
        } else if (cmp->parsed()) {
            auto c = resolve(o, false);
            print_metrics(csigwgan::run_compare(c).metrics);
        }
    } catch (std::invalid_argument const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
