// sdpuf: command-line front end for the SD / start-up / transfer pipeline.
#include "sdpuf/commands.hpp"
#include "sdpuf/error.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace sdpuf;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> workers;
    std::optional<std::int64_t> trials;
    std::optional<double> sigma_vth;
    std::optional<double> noise_sigma;
    std::optional<double> tol;
    std::optional<std::size_t> rows;
    std::optional<std::size_t> cols;
};

RunConfig resolve_config(const Overrides& o)
{
    RunConfig c;
    std::string path = o.config_path;
    if (path.empty())
        if (const char* env = std::getenv(kConfigEnvVar); env && *env)
            path = env;
    if (!path.empty())
        c = load_config(path);
    if (o.seed)
        c.seed = *o.seed;
    if (o.out)
        c.output_dir = *o.out;
    if (o.workers)
        c.workers = *o.workers;
    if (o.trials)
        c.n_trials = *o.trials;
    if (o.sigma_vth) {
        const double ratio = c.mismatch.sigma_vth_n > 0.0 ? c.mismatch.sigma_vth_p / c.mismatch.sigma_vth_n : 1.0;
        c.mismatch.sigma_vth_n = *o.sigma_vth;
        c.mismatch.sigma_vth_p = *o.sigma_vth * ratio;
    }
    if (o.noise_sigma)
        c.noise.sigma_init = *o.noise_sigma;
    if (o.tol)
        c.bisection_tol = *o.tol;
    if (o.rows)
        c.rows = *o.rows;
    if (o.cols)
        c.cols = *o.cols;
    c.validate();
    return c;
}

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config_path, "Run configuration JSON (default: $SDPUF_CONFIG)");
    cmd->add_option("--seed", o.seed, "Master seed for all random streams");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
    cmd->add_option("--trials", o.trials, "Power-up trials per cell")->check(CLI::PositiveNumber);
    cmd->add_option("--sigma-vth", o.sigma_vth, "n-channel threshold mismatch sigma (V)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--noise-sigma", o.noise_sigma, "Initial-condition noise sigma (V)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--tol", o.tol, "Flip-voltage bisection tolerance (V)")->check(CLI::PositiveNumber);
    cmd->add_option("--rows", o.rows, "Memory rows")->check(CLI::PositiveNumber);
    cmd->add_option("--cols", o.cols, "Memory columns")->check(CLI::PositiveNumber);
}

void report(const CommandResult& r)
{
    for (const auto& f : r.files)
        std::cout << f << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"SRAM start-up PUF reliability toolkit"};
    app.require_subcommand(1);
    Overrides o;

    auto* population = app.add_subcommand("population", "Monte Carlo population and SD sweep");
    add_common(population, o);

    StartupOptions startup_opts;
    std::string ingest;
    auto* startup = app.add_subcommand("startup", "Emulate or ingest power-up statistics");
    add_common(startup, o);
    startup->add_option("--ingest", ingest, "Measured counts CSV or bitmap file")->check(CLI::ExistingFile);
    startup->add_flag("--bitmap", startup_opts.write_bitmap, "Also write per-trial bits (emulation only)");
    startup->add_option("--reads", startup_opts.reads, "Sampled read-outs to write to responses.csv");

    std::string sd_file, sup_file, objective = "pairs";
    auto* fit = app.add_subcommand("fit", "Fit the SD -> SUP1 transfer function");
    add_common(fit, o);
    fit->add_option("--sd", sd_file, "SD CSV")->required();
    fit->add_option("--sup", sup_file, "Counts CSV or bitmap file")->required();
    fit->add_option("--objective", objective, "pairs | histogram")->check(CLI::IsMember({"pairs", "histogram"}));

    std::string model_file, threshold_sd;
    std::vector<double> probabilities;
    double upper = 0.0;
    auto* thresholds = app.add_subcommand("thresholds", "SD thresholds for start-up probabilities");
    add_common(thresholds, o);
    thresholds->add_option("--model", model_file, "Model JSON")->required();
    thresholds->add_option("--p", probabilities, "Probabilities (default from config)")->delimiter(',');
    thresholds->add_option("--sd", threshold_sd, "SD CSV for the cell-percentage column");
    thresholds->add_option("--upper", upper, "Upper end of the threshold search (V, default vdd)");

    std::vector<std::string> response_files;
    auto* metrics = app.add_subcommand("metrics", "PUF quality metrics of response files");
    add_common(metrics, o);
    metrics->add_option("files", response_files, "Response CSV files")->required();

    auto* calibrate = app.add_subcommand("calibrate", "Calibrate sigma_vth and sigma_init to the mass targets");
    add_common(calibrate, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        RunConfig config = resolve_config(o);
        const std::string& out = config.output_dir;
        if (population->parsed()) {
            report(cmd_population(config, out));
        } else if (startup->parsed()) {
            if (!ingest.empty()) {
                startup_opts.ingest_path = ingest;
                if (o.rows || o.cols)
                    startup_opts.geometry = Geometry{config.rows, config.cols};
            }
            report(cmd_startup(config, startup_opts, out));
        } else if (fit->parsed()) {
            config.fit.objective = objective == "histogram" ? FitObjective::Histogram : FitObjective::Pairs;
            report(cmd_fit(config, sd_file, sup_file, out));
        } else if (thresholds->parsed()) {
            if (probabilities.empty())
                probabilities = config.threshold_probabilities;
            std::optional<std::string> sd;
            if (!threshold_sd.empty())
                sd = threshold_sd;
            report(cmd_thresholds(model_file, probabilities, sd, upper > 0.0 ? upper : config.device.vdd, out));
        } else if (metrics->parsed()) {
            report(cmd_metrics(response_files, out));
        } else if (calibrate->parsed()) {
            report(cmd_calibrate(config, out));
        }
    } catch (const Error& e) {
        std::cerr << "sdpuf: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "sdpuf: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
