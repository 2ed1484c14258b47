#include "sdpuf/commands.hpp"

#include "sdpuf/error.hpp"
#include "sdpuf/io.hpp"
#include "sdpuf/metrics.hpp"

#include <json.hpp>

#include <filesystem>

namespace sdpuf {

using Json = nlohmann::ordered_json;

namespace {

std::string prepare(const std::string& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw Error(ErrorCode::Io, "cannot create directory '" + out_dir + "': " + ec.message());
    return out_dir;
}

std::string join(const std::string& dir, const char* name)
{
    return (std::filesystem::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text)
{
    auto out = io::open_output(path);
    out << text;
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

CommandResult finish(CommandResult r, const std::string& dir, const char* name, const Json& summary)
{
    r.summary_json = summary.dump(2) + "\n";
    const std::string path = join(dir, name);
    write_text(path, r.summary_json);
    r.files.push_back(path);
    return r;
}

std::vector<CellInstance> population_of(const RunConfig& c, std::size_t n)
{
    return sample_population(c.device.nominal_cell(), c.mismatch, n, c.seed);
}

Json fit_json(const FitResult& f)
{
    Json j = Json::parse(model_to_json(f));
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    return j;
}

} // namespace

CommandResult cmd_population(const RunConfig& config, const std::string& out_dir)
{
    config.validate();
    const std::string dir = prepare(out_dir);
    const auto pop = population_of(config, config.cells());
    const auto records = sd_sweep(pop, config.device.environment(), config.ramp, config.integrator,
                                  config.bisection_tol, config.workers);
    const auto values = sd_values(records);

    CommandResult r;
    r.files.push_back(join(dir, "population.csv"));
    write_population_csv(pop, r.files.back());
    r.files.push_back(join(dir, "sd.csv"));
    write_sd_csv(records, r.files.back());
    r.files.push_back(join(dir, "sd.json"));
    write_text(r.files.back(), sd_records_to_json(records));

    const double range = config.histogram_range;
    r.files.push_back(join(dir, "sd_histogram.csv"));
    write_histogram_csv(make_histogram(values, config.histogram_bins, -range, range), r.files.back());

    r.files.push_back(join(dir, "exceedance.csv"));
    {
        auto out = io::open_output(r.files.back());
        out << "sd_th_v,fraction\n";
        const int steps = 100;
        for (int i = 0; i <= steps; ++i) {
            const double t = range * i / steps;
            out << io::format_double(t) << ',' << io::format_double(exceedance(std::span<const double>(values), t))
                << '\n';
        }
    }

    std::size_t unsettled = 0, not_converged = 0;
    for (const auto& rec : records) {
        unsettled += rec.bias == StateLabel::Unsettled;
        not_converged += !rec.converged;
    }
    Json s;
    s["cells"] = records.size();
    s["seed"] = config.seed;
    s["sigma_vth_n"] = config.mismatch.sigma_vth_n;
    s["sigma_vth_p"] = config.mismatch.sigma_vth_p;
    s["fraction_within_0.04"] = fraction_within(records, 0.04);
    s["exceedance"] = {{"0.03", exceedance(std::span<const double>(values), 0.03)},
                       {"0.04", exceedance(std::span<const double>(values), 0.04)},
                       {"0.05", exceedance(std::span<const double>(values), 0.05)}};
    s["unsettled_test0"] = unsettled;
    s["not_converged"] = not_converged;
    return finish(std::move(r), dir, "population_summary.json", s);
}

CommandResult cmd_startup(const RunConfig& config, const StartupOptions& options, const std::string& out_dir)
{
    config.validate();
    const std::string dir = prepare(out_dir);
    CommandResult r;
    Json s;

    StartupDataset ds;
    if (options.ingest_path) {
        ds = ingest_dataset(*options.ingest_path, options.geometry);
        s["source"] = "measured";
    } else {
        const auto pop = population_of(config, config.cells());
        SupOptions sup;
        sup.keep_trial_bits = options.write_bitmap;
        auto sim = simulate_dataset(pop, config.rows, config.cols, config.device.environment(), config.ramp,
                                    config.noise, config.n_trials, config.seed, config.integrator, sup,
                                    config.workers);
        ds = std::move(sim.dataset);
        s["source"] = "simulated";
        s["sigma_init"] = config.noise.sigma_init;
        s["retry_exhausted"] = sim.retry_exhausted;
        if (options.write_bitmap) {
            r.files.push_back(join(dir, "bitmap.txt"));
            write_bitmap(config.rows, config.cols, sim.trial_bits, r.files.back());
        }
    }

    r.files.push_back(join(dir, "counts.csv"));
    write_counts_csv(ds, r.files.back());
    r.files.push_back(join(dir, "sup_histogram.csv"));
    write_histogram_csv(make_histogram(ds.sup1_values(), config.histogram_bins, 0.0, 1.0), r.files.back());
    r.files.push_back(join(dir, "spatial_map.csv"));
    write_spatial_map(ds, r.files.back());

    if (options.reads > 0) {
        std::vector<PufResponse> reads;
        for (std::size_t i = 0; i < options.reads; ++i)
            reads.push_back(sample_response(ds, config.seed, i, "chip0"));
        r.files.push_back(join(dir, "responses.csv"));
        write_responses(reads, r.files.back());
    }

    const RegionFractions rf = classify_regions(ds, config.region_low, config.region_high);
    s["rows"] = ds.rows;
    s["cols"] = ds.cols;
    s["cells"] = ds.size();
    s["mean_ber"] = mean_ber(ds);
    s["regions"] = {{"low", config.region_low}, {"high", config.region_high}, {"A0", rf.a0}, {"B", rf.b}, {"A1", rf.a1}};
    return finish(std::move(r), dir, "startup_report.json", s);
}

CommandResult cmd_fit(const RunConfig& config, const std::string& sd_file, const std::string& sup_file,
                      const std::string& out_dir)
{
    const auto records = read_sd_csv(sd_file);
    const auto ds = ingest_dataset(sup_file);
    const std::string dir = prepare(out_dir);
    const auto sd = sd_values(records);
    const auto sup = ds.sup1_values();
    const auto points = quantile_pairs(sd, sup);

    const FitResult single = fit_single(points, config.fit);
    const FitResult dbl = fit_double(points, config.fit);

    CommandResult r;
    r.files.push_back(join(dir, "model_single.json"));
    save_model(single, r.files.back());
    r.files.push_back(join(dir, "model_double.json"));
    save_model(dbl, r.files.back());

    r.files.push_back(join(dir, "fit_points.csv"));
    {
        auto out = io::open_output(r.files.back());
        out << "sd_v,sup1,single,double\n";
        for (const auto& p : points)
            out << io::format_double(p.sd) << ',' << io::format_double(p.sup) << ','
                << io::format_double(eval(single.model, p.sd)) << ',' << io::format_double(eval(dbl.model, p.sd))
                << '\n';
    }
    r.files.push_back(join(dir, "fit_curve.csv"));
    {
        auto out = io::open_output(r.files.back());
        out << "sd_v,single,double\n";
        const double range = config.histogram_range;
        const int steps = 400;
        for (int i = -steps / 2; i <= steps / 2; ++i) {
            const double x = range * i / (steps / 2);
            out << io::format_double(x) << ',' << io::format_double(eval(single.model, x)) << ','
                << io::format_double(eval(dbl.model, x)) << '\n';
        }
    }
    r.files.push_back(join(dir, "fit_overlay.csv"));
    {
        std::vector<double> pred_single, pred_double;
        for (double x : sd) {
            pred_single.push_back(eval(single.model, x));
            pred_double.push_back(eval(dbl.model, x));
        }
        const std::size_t bins = config.histogram_bins;
        const Histogram hm = make_histogram(sup, bins, 0.0, 1.0);
        const Histogram hs = make_histogram(pred_single, bins, 0.0, 1.0);
        const Histogram hd = make_histogram(pred_double, bins, 0.0, 1.0);
        auto out = io::open_output(r.files.back());
        out << "bin_left,bin_right,measured,single,double\n";
        for (std::size_t i = 0; i < bins; ++i)
            out << io::format_double(hm.bin_edges[i]) << ',' << io::format_double(hm.bin_edges[i + 1]) << ','
                << io::format_double(hm.relative_frequency(i)) << ',' << io::format_double(hs.relative_frequency(i))
                << ',' << io::format_double(hd.relative_frequency(i)) << '\n';
    }

    Json s;
    s["points"] = points.size();
    s["objective"] = config.fit.objective == FitObjective::Pairs ? "pairs" : "histogram";
    s["single"] = fit_json(single);
    s["double"] = fit_json(dbl);
    return finish(std::move(r), dir, "fit_report.json", s);
}

CommandResult cmd_thresholds(const std::string& model_file, const std::vector<double>& probabilities,
                             const std::optional<std::string>& sd_file, double upper, const std::string& out_dir)
{
    const FitResult model = load_model(model_file);
    std::vector<double> sd;
    if (sd_file)
        sd = sd_values(read_sd_csv(*sd_file));
    const auto rows = threshold_table(model.model, probabilities, sd, upper);
    const std::string dir = prepare(out_dir);
    CommandResult r;
    r.files.push_back(join(dir, "thresholds.csv"));
    write_threshold_csv(rows, r.files.back());
    r.summary_json = "";
    return r;
}

CommandResult cmd_metrics(const std::vector<std::string>& response_files, const std::string& out_dir)
{
    if (response_files.empty())
        throw Error(ErrorCode::EmptySet, "no response files given");
    std::vector<PufResponse> all;
    for (const auto& f : response_files) {
        auto rs = read_responses(f);
        all.insert(all.end(), std::make_move_iterator(rs.begin()), std::make_move_iterator(rs.end()));
    }
    const MetricsReport rep = metrics_report(all);
    const std::string dir = prepare(out_dir);
    CommandResult r;
    r.summary_json = metrics_report_json(rep);
    r.files.push_back(join(dir, "metrics.json"));
    write_text(r.files.back(), r.summary_json);
    return r;
}

CommandResult cmd_calibrate(const RunConfig& config, const std::string& out_dir)
{
    config.validate();
    const std::string dir = prepare(out_dir);
    const auto& cal = config.calibration;
    const CellInstance nominal = config.device.nominal_cell();
    const CellEnvironment env = config.device.environment();

    const SigmaCalibration sv =
        calibrate_sigma_vth(nominal, config.mismatch, env, config.ramp, config.integrator, config.bisection_tol,
                            cal.cells, config.seed, cal.sd_threshold, cal.target_within, config.workers);
    RunConfig out = config;
    out.mismatch = {sv.sigma_vth_n, sv.sigma_vth_p};

    const auto pop = sample_population(nominal, out.mismatch, cal.cells, config.seed);
    const NoiseCalibration nc =
        calibrate_sigma_init(pop, env, config.ramp, cal.noise_trials, config.seed, config.region_low,
                             config.region_high, cal.target_b_mass, config.integrator, config.workers);
    out.noise.sigma_init = nc.sigma_init;
    out.workers = 0; // execution setting, kept out of the result

    CommandResult r;
    r.files.push_back(join(dir, "calibrated_config.json"));
    save_config(out, r.files.back());
    Json s;
    s["cells"] = cal.cells;
    s["sigma_vth_n"] = sv.sigma_vth_n;
    s["sigma_vth_p"] = sv.sigma_vth_p;
    s["achieved_within"] = sv.achieved_within;
    s["target_within"] = cal.target_within;
    s["sigma_iterations"] = sv.iterations;
    s["sigma_init"] = nc.sigma_init;
    s["achieved_b_mass"] = nc.achieved_b;
    s["target_b_mass"] = cal.target_b_mass;
    s["noise_iterations"] = nc.iterations;
    return finish(std::move(r), dir, "calibration_report.json", s);
}

int exit_code(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::Malformed:
    case ErrorCode::InvalidArgument:
    case ErrorCode::SizeMismatch:
    case ErrorCode::EmptySet:
        return 2;
    case ErrorCode::NoConvergence:
    case ErrorCode::NoFlip:
    case ErrorCode::Unreachable:
        return 3;
    case ErrorCode::Io:
        return 4;
    }
    return 1;
}

} // namespace sdpuf
