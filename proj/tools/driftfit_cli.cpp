#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "driftfit/config.hpp"
#include "driftfit/ensemble_io.hpp"
#include "driftfit/errors.hpp"
#include "driftfit/experiment.hpp"
#include "driftfit/expression.hpp"
#include "driftfit/metrics.hpp"
#include "driftfit/model_io.hpp"
#include "driftfit/presets.hpp"
#include "driftfit/simulate.hpp"

namespace {

using namespace driftfit;

int run_simulate(const std::string& config_path, const std::string& out_path, int threads) {
    harness::ExperimentConfig cfg = harness::load_config(config_path);
    if (threads > 0)
        cfg.threads = threads;
    const dynamics::DriftPtr truth = harness::expression_drift(cfg.drift);
    const dynamics::Ensemble data = dynamics::simulate_ensemble(
        *truth, cfg.covariance(), cfg.grid(), static_cast<std::size_t>(cfg.trajectories),
        cfg.initial(), cfg.seed, /*record_noise=*/true, cfg.threads);
    harness::save_ensemble(data, out_path);
    std::cout << "wrote " << data.size() << " trajectories to " << out_path << "\n";
    return 0;
}

int run_fit(const std::string& config_path, const std::string& data_path,
            const std::string& model_path, int threads) {
    harness::ExperimentConfig cfg = harness::load_config(config_path);
    if (threads > 0)
        cfg.threads = threads;
    const dynamics::Ensemble data = harness::load_ensemble(data_path, cfg.dim);
    estimator::ConvergenceReport training;
    const dynamics::DriftPtr fitted = harness::fit_from_config(cfg, data, &training);
    harness::save_model(*fitted, model_path);
    std::cout << "wrote model to " << model_path;
    if (training.iterations > 0)
        std::cout << " (" << training.iterations << " iterations, final loss "
                  << training.final_loss << ")";
    std::cout << "\n";
    return 0;
}

int run_evaluate(const std::string& config_path, const std::string& data_path,
                 const std::string& model_path, const std::string& report_path) {
    harness::ExperimentConfig cfg = harness::load_config(config_path);
    const dynamics::Ensemble data = harness::load_ensemble(data_path, cfg.dim);
    harness::ExperimentResult result;
    result.truth = harness::expression_drift(cfg.drift);
    result.fitted = harness::load_model(model_path);
    if (result.fitted->dim() != cfg.dim)
        throw FormatError("model dimension does not match the config");
    result.metrics = metrics::compute_metrics(*result.truth, *result.fitted, data, cfg.snapshots,
                                              cfg.central_fraction);
    const std::string report = harness::render_report(cfg, result);
    {
        std::ofstream out(report_path, std::ios::binary);
        if (!out)
            throw IoError("cannot open '" + report_path + "' for writing");
        out << report;
    }
    std::cout << report;
    return 0;
}

int run_reproduce(const std::string& name, int scale, long long seed, std::string out_dir,
                  int threads) {
    harness::Preset preset = harness::get_preset(name);
    harness::ExperimentConfig& cfg = preset.config;
    if (scale > 0)
        cfg.trajectories = scale;
    if (seed >= 0)
        cfg.seed = static_cast<std::uint64_t>(seed);
    if (threads > 0)
        cfg.threads = threads;
    if (out_dir.empty())
        out_dir = "reproduce-" + name;
    std::filesystem::create_directories(out_dir);
    cfg.output.trajectories = out_dir + "/trajectories.csv";
    cfg.output.model = out_dir + "/model.json";
    cfg.output.report = out_dir + "/report.json";
    cfg.output.plots = out_dir + "/plots";

    const harness::ExperimentResult result = harness::run_experiment(cfg, &preset);

    std::cout << "preset " << name << " (M=" << cfg.trajectories << ", seed=" << cfg.seed
              << ")\n";
    std::cout << "  relative L2(rho) error: " << result.metrics.l2_rho.value << "\n";
    if (result.metrics.central_fraction > 0.0)
        std::cout << "  central " << result.metrics.central_fraction * 100.0
                  << "% L2(rho) error: " << result.metrics.central_l2.value << "\n";
    std::cout << "  relative trajectory error: " << result.metrics.trajectory.mean << " +- "
              << result.metrics.trajectory.std_dev << "\n";
    for (const auto& w : result.metrics.wasserstein)
        std::cout << "  wasserstein t=" << w.time << ": " << w.distance << "\n";
    const bool pass = harness::bands_pass(preset.bands, result.metrics);
    std::cout << "  bands: " << (pass ? "PASS" : "FAIL") << "\n";
    std::cout << "outputs in " << out_dir << "\n";
    return 0;
}

int run_list_presets() {
    for (const auto& name : harness::preset_names()) {
        const harness::Preset& p = harness::get_preset(name);
        std::printf("%-16s %s\n", name.c_str(), p.summary.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftfit: drift identification for SDE trajectory data"};
    app.require_subcommand(1);

    std::string config_path, data_path, model_path, report_path, out_path, preset_name, out_dir;
    int threads = 0;  // 0 = take the config's value
    int scale = 0;
    long long seed = -1;

    CLI::App* sim = app.add_subcommand("simulate", "Sample an ensemble and write it as CSV");
    sim->add_option("--config", config_path, "experiment config (JSON)")->required();
    sim->add_option("--out", out_path, "output trajectory CSV")->required();
    sim->add_option("--threads", threads, "worker threads (default: config value)");

    CLI::App* fit = app.add_subcommand("fit", "Fit a drift to a trajectory CSV");
    fit->add_option("--config", config_path, "experiment config (JSON)")->required();
    fit->add_option("--data", data_path, "input trajectory CSV")->required();
    fit->add_option("--model-out", model_path, "output model file")->required();
    fit->add_option("--threads", threads, "worker threads (default: config value)");

    CLI::App* eval = app.add_subcommand("evaluate", "Score a fitted model against data");
    eval->add_option("--config", config_path, "experiment config (JSON)")->required();
    eval->add_option("--data", data_path, "input trajectory CSV (with noise columns)")->required();
    eval->add_option("--model", model_path, "fitted model file")->required();
    eval->add_option("--report", report_path, "output report (JSON)")->required();

    CLI::App* repro = app.add_subcommand("reproduce", "Run a named preset end to end");
    repro->add_option("preset", preset_name, "preset name (see list-presets)")->required();
    repro->add_option("--scale", scale, "override the trajectory count M");
    repro->add_option("--seed", seed, "override the simulation seed");
    repro->add_option("--out-dir", out_dir, "output directory (default reproduce-<preset>)");
    repro->add_option("--threads", threads, "worker threads (default: config value)");

    CLI::App* list = app.add_subcommand("list-presets", "List available presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (sim->parsed())
            return run_simulate(config_path, out_path, threads);
        if (fit->parsed())
            return run_fit(config_path, data_path, model_path, threads);
        if (eval->parsed())
            return run_evaluate(config_path, data_path, model_path, report_path);
        if (repro->parsed())
            return run_reproduce(preset_name, scale, seed, out_dir, threads);
        if (list->parsed())
            return run_list_presets();
    } catch (const NotSpdError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const NonFiniteError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const SingularSystemError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const DivergedError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateDomainError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
