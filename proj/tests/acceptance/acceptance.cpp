// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion not listed with --known-failure fails.
#include "sdpuf/commands.hpp"
#include "sdpuf/config.hpp"
#include "sdpuf/dynamics.hpp"
#include "sdpuf/error.hpp"
#include "sdpuf/io.hpp"
#include "sdpuf/metrics.hpp"
#include "sdpuf/rng.hpp"
#include "sdpuf/separatrix.hpp"
#include "sdpuf/startup.hpp"
#include "sdpuf/transfer.hpp"
#include "sdpuf/variation.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace sdpuf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok)
            pass = false;
        if (!detail.empty())
            detail += "; ";
        detail += what + (ok ? "" : " [miss]");
    }
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("sdpuf_accept_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const DoubleLogistic kReference = kReferenceDouble;
constexpr double kSdSigma = 0.0239; // V, Gaussian whose +-40 mV mass is 90.6%
constexpr double kTraceTolerance = 1e-4;

std::vector<CurvePoint> synthetic_points(std::int64_t n_trials)
{
    const auto sd = synthetic_sd_samples(16384, kSdSigma, 1);
    return quantile_pairs(sd, synthetic_sup_samples(kReference, sd, n_trials, 2));
}

Outcome thresholds()
{
    Outcome o;
    for (const auto& [p, want] : std::vector<std::pair<double, double>>{{0.99, 0.030}, {0.98, 0.019}, {0.95, 0.008}}) {
        const double got = invert_threshold(kReference, p);
        o.require(std::abs(got - want) <= 0.001, "p=" + fmt("%.2f", p) + " SD_th=" + fmt("%.5f", got) + " V (want "
                                                     + fmt("%.3f", want) + ")");
    }
    return o;
}

Outcome slope()
{
    Outcome o;
    const double s = slope_at_zero(kReference);
    const double formula = (0.158 * 101.2 + 0.842 * 2348) / 4;
    o.require(std::abs(s - formula) <= 1e-9 * formula, "slope=" + fmt("%.4f", s) + " /V");
    o.require(std::abs(s - 500.0) <= 0.02 * 500.0, "within 2% of 500");
    const double step = eval_double(kReference, 0.0002) - eval_double(kReference, 0.0);
    o.require(std::abs(step - 0.1) <= 0.01, "SUP1 gain over 0.2 mV=" + fmt("%.4f", step));
    return o;
}

Outcome requirements()
{
    Outcome o;
    const TransferModel fitted = fit_double(synthetic_points(1000)).model;
    for (const auto& [name, model] : std::vector<std::pair<std::string, TransferModel>>{{"reference", kReference},
                                                                                       {"fitted", fitted}}) {
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double x = -0.2 + 0.4 * i / 999.0;
            worst = std::max(worst, std::abs(eval(model, x) + eval(model, -x) - 1.0));
        }
        o.require(eval(model, 0.0) == 0.5, name + " eval(0)=0.5");
        o.require(std::abs(eval(model, 10.0) - 1.0) <= 1e-9 && std::abs(eval(model, -10.0)) <= 1e-9,
                  name + " saturates at +-10 V");
        o.require(worst <= 1e-12, name + " symmetry error " + fmt("%.1e", worst));
    }
    return o;
}

Outcome round_trip()
{
    Outcome o;
    auto check = [&](const std::string& tag, const DoubleLogistic& m, double dm, double dk) {
        o.require(std::abs(m.m - kReference.m) <= dm && std::abs(m.k1 - kReference.k1) <= dk * kReference.k1
                      && std::abs(m.k2 - kReference.k2) <= dk * kReference.k2,
                  tag + " m=" + fmt("%.4f", m.m) + " k1=" + fmt("%.1f", m.k1) + " k2=" + fmt("%.0f", m.k2));
    };
    check("noiseless", std::get<DoubleLogistic>(fit_double(synthetic_points(0)).model), 0.02, 0.10);
    const auto noisy = synthetic_points(1000);
    const FitResult d = fit_double(noisy);
    const FitResult s = fit_single(noisy);
    check("N=1000", std::get<DoubleLogistic>(d.model), 0.05, 0.15);
    o.require(d.residual < s.residual,
              "residual double " + fmt("%.4g", d.residual) + " < single " + fmt("%.4g", s.residual));
    return o;
}

Outcome sd_vs_oracle(const RunConfig& c)
{
    Outcome o;
    const CellEnvironment env = c.device.environment();
    const CellInstance nominal = c.device.nominal_cell();
    const auto pop = sample_population(nominal, c.mismatch, 200, c.seed);
    double worst = 0.0, worst_mirror = 0.0;
    for (const auto& cell : pop) {
        const double sd = compute_sd(cell, env, c.ramp, c.integrator, c.bisection_tol).sd;
        worst = std::max(worst, std::abs(sd - sd_oracle(cell, env, c.ramp, 1e-4, c.integrator)));
        const double mirrored = compute_sd(cell.mirrored(), env, c.ramp, c.integrator, c.bisection_tol).sd;
        worst_mirror = std::max(worst_mirror, std::abs(sd + mirrored));
    }
    o.require(worst <= 1.5e-4, "max |SD - oracle|=" + fmt("%.3f", worst * 1e3) + " mV over 200 cells");
    const double sym = std::abs(compute_sd(nominal, env, c.ramp, c.integrator, c.bisection_tol).sd);
    o.require(sym <= 5e-5, "symmetric |SD|=" + fmt("%.3f", sym * 1e3) + " mV");
    o.require(worst_mirror <= 1e-4, "max mirrored mismatch=" + fmt("%.3f", worst_mirror * 1e3) + " mV");
    return o;
}

Outcome step_robustness(const RunConfig& c)
{
    Outcome o;
    const CellEnvironment env = c.device.environment();
    const auto pop = sample_population(c.device.nominal_cell(), c.mismatch, 1000, c.seed);
    IntegratorOptions half = c.integrator;
    half.time_step *= 0.5;
    const auto a = sd_sweep(pop, env, c.ramp, c.integrator, c.bisection_tol, c.workers);
    const auto b = sd_sweep(pop, env, c.ramp, half, c.bisection_tol, c.workers);
    std::size_t changed = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        if (a[i].bias != b[i].bias)
            ++changed;
        else
            worst = std::max(worst, std::abs(a[i].sd - b[i].sd));
    }
    const double frac = static_cast<double>(changed) / static_cast<double>(pop.size());
    o.require(frac < 0.005, "labels changed " + fmt("%.2f", 100 * frac) + "%");
    o.require(worst < 1e-4, "max SD change=" + fmt("%.3f", worst * 1e3) + " mV");

    const auto line = trace_separatrix(c.device.nominal_cell(), env, 200, c.integrator);
    double off = 0.0;
    for (const StateVector& p : line)
        off = std::max(off, std::abs(p.v_q - p.v_qb));
    o.require(off < kTraceTolerance, "symmetric trace off-diagonal " + fmt("%.1e", off) + " V");
    return o;
}

Outcome calibration(const RunConfig& base)
{
    Outcome o;
    const fs::path dir = scratch("calibration");
    RunConfig cfg = base;
    cmd_calibrate(cfg, dir.string());
    cfg = load_config((dir / "calibrated_config.json").string());
    cfg.rows = 256;
    cfg.cols = 64;
    cmd_population(cfg, dir.string());
    const auto records = read_sd_csv((dir / "sd.csv").string());
    const double within = fraction_within(records, 0.04);
    o.require(records.size() == 16384, std::to_string(records.size()) + " cells");
    o.require(std::abs(within - 0.906) <= 0.05, "within +-40 mV " + fmt("%.1f", 100 * within) + "%");
    for (const auto& [th, want] : std::vector<std::pair<double, double>>{{0.03, 0.21}, {0.04, 0.094}, {0.05, 0.03}}) {
        const double e = exceedance(std::span<const SdRecord>(records), th);
        o.require(std::abs(e - want) <= 0.05, "exceed " + fmt("%.2f", th) + " V " + fmt("%.1f", 100 * e) + "%");
    }
    const auto st = nlohmann::json::parse(cmd_startup(cfg, {}, dir.string()).summary_json);
    const double b = st["regions"]["B"], a = double(st["regions"]["A0"]) + double(st["regions"]["A1"]);
    o.require(std::abs(b - 0.08) <= 0.03, "B " + fmt("%.1f", 100 * b) + "%");
    o.require(std::abs(a - 0.92) <= 0.03, "A0+A1 " + fmt("%.1f", 100 * a) + "%");
    o.detail += "; sigma_vth=" + fmt("%.4f", cfg.mismatch.sigma_vth_n) + " sigma_init="
                + fmt("%.5f", cfg.noise.sigma_init) + " mean BER " + fmt("%.4f", double(st["mean_ber"]));
    fs::remove_all(dir);
    return o;
}

Outcome ber()
{
    Outcome o;
    const fs::path dir = scratch("ber");
    const std::string path = (dir / "counts.csv").string();
    std::ofstream(path) << "cell_id,n_ones,n_trials\n0,990,1000\n1,10,1000\n";
    const StartupDataset ds = ingest_dataset(path);
    o.require(ds.records[0].sup1 == 0.99 && cell_ber(ds.records[0]) == 0.01, "N1=990: SUP1=0.99, BER=0.01");
    o.require(cell_ber(ds.records[1]) == 0.01, "N1=10: BER=0.01");

    // Memory shaped like the measured SUP1 histogram: a Gaussian SD population
    // mapped through the reference transfer curve, 1000 power-ups per cell.
    const auto sd = synthetic_sd_samples(16384, kSdSigma, 3);
    const auto sup = synthetic_sup_samples(kReference, sd, 1000, 4);
    StartupDataset shaped;
    shaped.rows = 256;
    shaped.cols = 64;
    for (std::size_t i = 0; i < sup.size(); ++i)
        shaped.records.push_back(StartupRecord::from_counts(static_cast<std::int64_t>(i),
                                                         std::llround(sup[i] * 1000.0), 1000));
    const double m = mean_ber(shaped);
    o.require(std::abs(m - 0.045) <= 0.01, "synthetic mean BER " + fmt("%.4f", m));
    fs::remove_all(dir);
    return o;
}

Outcome metrics()
{
    Outcome o;
    std::vector<PufResponse> rs;
    for (std::uint64_t i = 0; i < 20; ++i) {
        CounterRng rng(7, StreamTag::Synthetic, {i});
        PufResponse r{"chip" + std::to_string(i), {}};
        for (int j = 0; j < 4096; ++j)
            r.bits.push_back(static_cast<std::uint8_t>(rng() >> 63));
        rs.push_back(std::move(r));
    }
    PufResponse comp = rs[0];
    for (auto& b : comp.bits)
        b ^= 1;
    o.require(uniqueness(std::vector{rs[0], rs[0]}) == 0.0, "identical 0%");
    o.require(uniqueness(std::vector{rs[0], comp}) == 100.0, "complementary 100%");
    o.require(bit_aliasing(rs) == mean_uniformity(rs), "bit aliasing = mean uniformity");
    o.require(reliability(rs[0], std::vector{rs[0]}) == 100.0, "self reliability 100%");
    const double u = uniqueness(rs);
    o.require(std::abs(u - 50.0) <= 1.5, "random uniqueness " + fmt("%.2f", u) + "%");
    return o;
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file())
            continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), dir).string()] = ss.str();
    }
    return out;
}

void run_all_commands(RunConfig c, unsigned workers, const fs::path& dir)
{
    c.workers = workers;
    const std::string d = dir.string();
    cmd_population(c, d);
    StartupOptions so;
    so.write_bitmap = true;
    so.reads = 3;
    cmd_startup(c, so, d);
    cmd_fit(c, (dir / "sd.csv").string(), (dir / "counts.csv").string(), d);
    cmd_thresholds((dir / "model_double.json").string(), c.threshold_probabilities, (dir / "sd.csv").string(), 1.2, d);
    cmd_metrics({(dir / "responses.csv").string()}, d);
    cmd_calibrate(c, (dir / "calibrate").string());
}

Outcome determinism(const RunConfig& base)
{
    Outcome o;
    RunConfig c = base;
    c.rows = 16;
    c.cols = 16;
    c.n_trials = 200;
    c.calibration.cells = 256;
    c.calibration.noise_trials = 200;
    const fs::path a = scratch("det1"), b = scratch("det4");
    run_all_commands(c, 1, a);
    run_all_commands(c, 4, b);
    const auto sa = snapshot(a), sb = snapshot(b);
    std::size_t differ = 0;
    for (const auto& [name, body] : sa) {
        const auto it = sb.find(name);
        if (it == sb.end() || it->second != body) {
            ++differ;
            o.require(false, "differs: " + name);
        }
    }
    o.require(sa.size() == sb.size() && differ == 0,
              std::to_string(sa.size()) + " files identical across 1 and 4 workers");
    fs::remove_all(a);
    fs::remove_all(b);
    return o;
}

} // namespace

int main(int argc, char** argv)
{
    RunConfig config;
    config.workers = 0;
    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"threshold table", thresholds},
        {"slope at zero", slope},
        {"transfer requirements", requirements},
        {"fit round trip", round_trip},
        {"SD vs oracle", [&] { return sd_vs_oracle(config); }},
        {"step robustness", [&] { return step_robustness(config); }},
        {"calibration targets", [&] { return calibration(config); }},
        {"SUP and BER", ber},
        {"metrics", metrics},
        {"determinism", [&] { return determinism(config); }},
    };
    // Criteria listed with --known-failure still run and still print FAIL,
    // but do not change the exit status.
    std::vector<int> only, known;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--known-failure" && i + 1 < argc)
            known.push_back(std::atoi(argv[++i]));
        else
            only.push_back(std::atoi(argv[i]));
    }

    int failed = 0, failed_known = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool is_known = std::find(known.begin(), known.end(), n) != known.end();
        std::printf("%s %2d %s (%.1f s): %s%s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first.c_str(), secs,
                    o.detail.c_str(), !o.pass && is_known ? " (known failure)" : "");
        std::fflush(stdout);
        if (!o.pass)
            (is_known ? failed_known : failed) += 1;
    }
    std::printf("%d criteria failed, %d of them known\n", failed + failed_known, failed_known);
    return failed == 0 ? 0 : 1;
}
