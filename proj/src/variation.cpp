#include "sdpuf/variation.hpp"

#include "sdpuf/error.hpp"
#include "sdpuf/io.hpp"
#include "sdpuf/parallel.hpp"
#include "sdpuf/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <random>

namespace sdpuf {

void MismatchSpec::validate() const
{
    if (!(sigma_vth_n >= 0.0) || !(sigma_vth_p >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "mismatch sigmas must be >= 0");
}

CellInstance sample_cell(const CellInstance& nominal, const MismatchSpec& spec, std::uint64_t seed,
                         std::int64_t index)
{
    CounterRng rng(seed, StreamTag::Population, {static_cast<std::uint64_t>(index)});
    std::normal_distribution<double> z(0.0, 1.0);
    CellInstance c = nominal;
    c.cell_id = index;
    for (TransistorInstance* t : {&c.n1, &c.n2, &c.p1, &c.p2, &c.nx1, &c.nx2}) {
        const double sigma = t->params.polarity == Polarity::NChannel ? spec.sigma_vth_n : spec.sigma_vth_p;
        t->vth_offset = sigma * z(rng);
    }
    return c;
}

std::vector<CellInstance> sample_population(const CellInstance& nominal, const MismatchSpec& spec,
                                            std::size_t n, std::uint64_t seed)
{
    spec.validate();
    std::vector<CellInstance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(sample_cell(nominal, spec, seed, static_cast<std::int64_t>(i)));
    return out;
}

std::vector<SdRecord> sd_sweep(std::span<const CellInstance> population, const CellEnvironment& env,
                               const RampSpec& ramp, const IntegratorOptions& opts, double tolerance,
                               unsigned workers)
{
    if (population.empty())
        throw Error(ErrorCode::EmptySet, "population is empty");
    std::vector<SdRecord> out(population.size());
    parallel_for(population.size(), workers, [&](std::size_t i) {
        out[i] = compute_sd(population[i], env, ramp, opts, tolerance);
    });
    return out;
}

double exceedance(std::span<const double> sd_values, double threshold)
{
    if (!(threshold >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "threshold must be >= 0");
    if (sd_values.empty())
        throw Error(ErrorCode::EmptySet, "no SD values");
    std::size_t n = 0;
    for (double v : sd_values)
        if (std::abs(v) >= threshold)
            ++n;
    return static_cast<double>(n) / static_cast<double>(sd_values.size());
}

double exceedance(std::span<const SdRecord> records, double threshold)
{
    const std::vector<double> v = sd_values(records);
    return exceedance(std::span<const double>(v), threshold);
}

double fraction_within(std::span<const SdRecord> records, double threshold)
{
    return 1.0 - exceedance(records, threshold);
}

double Histogram::relative_frequency(std::size_t bin) const noexcept
{
    const auto n = sample_count();
    return n == 0 ? 0.0 : static_cast<double>(counts[bin]) / static_cast<double>(n);
}

Histogram make_histogram(std::span<const double> samples, std::size_t n_bins, double lo, double hi)
{
    if (n_bins < 1)
        throw Error(ErrorCode::InvalidArgument, "n_bins must be >= 1");
    if (!(hi > lo))
        throw Error(ErrorCode::InvalidArgument, "histogram range is degenerate");
    Histogram h;
    h.counts.assign(n_bins, 0);
    h.bin_edges.resize(n_bins + 1);
    const double span = hi - lo;
    for (std::size_t i = 0; i <= n_bins; ++i)
        h.bin_edges[i] = lo + span * static_cast<double>(i) / static_cast<double>(n_bins);
    h.bin_edges.back() = hi;
    const double nb = static_cast<double>(n_bins);
    for (double x : samples) {
        if (x < lo) {
            ++h.underflow;
        } else if (x > hi || std::isnan(x)) {
            ++h.overflow;
        } else {
            auto b = static_cast<std::size_t>(std::floor((x - lo) * nb / span));
            if (b >= n_bins)
                b = n_bins - 1;
            ++h.counts[b];
            ++h.total;
        }
    }
    return h;
}

std::vector<double> sd_values(std::span<const SdRecord> records)
{
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records)
        v.push_back(r.sd);
    return v;
}

void write_sd_csv(std::span<const SdRecord> records, const std::string& path)
{
    auto out = io::open_output(path);
    out << "cell_id,sd_volts,bias,converged,iterations\n";
    for (const auto& r : records)
        out << r.cell_id << ',' << io::format_double(r.sd) << ',' << to_string(r.bias) << ','
            << (r.converged ? 1 : 0) << ',' << r.iterations << '\n';
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

std::vector<SdRecord> read_sd_csv(const std::string& path)
{
    const auto lines = io::read_lines(path);
    if (lines.empty() || io::trim(lines[0]) != "cell_id,sd_volts,bias,converged,iterations")
        throw Error(ErrorCode::Malformed, path + ":1: expected header cell_id,sd_volts,bias,converged,iterations");
    std::vector<SdRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty())
            continue;
        const auto f = io::split(lines[i], ',');
        SdRecord r;
        std::int64_t iterations = 0, converged = 0;
        bool ok = f.size() == 5 && io::parse_int(f[0], r.cell_id) && io::parse_double(f[1], r.sd)
                  && io::parse_int(f[3], converged) && (converged == 0 || converged == 1)
                  && io::parse_int(f[4], iterations);
        if (ok) {
            try {
                r.bias = parse_state_label(std::string(io::trim(f[2])));
            } catch (const Error&) {
                ok = false;
            }
        }
        if (!ok)
            throw Error(ErrorCode::Malformed, path + ":" + std::to_string(i + 1) + ": bad SD row");
        r.flip_voltage = std::abs(r.sd);
        r.iterations = static_cast<int>(iterations);
        r.converged = converged == 1;
        out.push_back(r);
    }
    if (out.empty())
        throw Error(ErrorCode::Malformed, path + ": no SD rows");
    return out;
}

std::string sd_records_to_json(std::span<const SdRecord> records)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : records)
        j.push_back({{"cell_id", r.cell_id},
                     {"sd_volts", r.sd},
                     {"bias", to_string(r.bias)},
                     {"converged", r.converged},
                     {"iterations", r.iterations}});
    return j.dump(1) + "\n";
}

void write_population_csv(std::span<const CellInstance> population, const std::string& path)
{
    auto out = io::open_output(path);
    out << "cell_id,dvth_n1,dvth_n2,dvth_p1,dvth_p2,dvth_nx1,dvth_nx2\n";
    for (const auto& c : population) {
        out << c.cell_id;
        for (double o : c.offsets())
            out << ',' << io::format_double(o);
        out << '\n';
    }
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

void write_histogram_csv(const Histogram& h, const std::string& path)
{
    auto out = io::open_output(path);
    out << "bin_left,bin_right,count,relative_frequency\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << io::format_double(h.bin_edges[i]) << ',' << io::format_double(h.bin_edges[i + 1]) << ','
            << h.counts[i] << ',' << io::format_double(h.relative_frequency(i)) << '\n';
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

SigmaCalibration calibrate_sigma_vth(const CellInstance& nominal, const MismatchSpec& base,
                                     const CellEnvironment& env, const RampSpec& ramp,
                                     const IntegratorOptions& opts, double tolerance,
                                     std::size_t n_cells, std::uint64_t seed, double threshold,
                                     double target_within, unsigned workers,
                                     double fraction_tolerance, int max_iterations)
{
    base.validate();
    if (!(target_within > 0.0 && target_within < 1.0))
        throw Error(ErrorCode::InvalidArgument, "target fraction must lie in (0, 1)");
    const double ratio = base.sigma_vth_n > 0.0 ? base.sigma_vth_p / base.sigma_vth_n : 1.0;

    SigmaCalibration out;
    auto evaluate = [&](double sigma_n) {
        const MismatchSpec spec{sigma_n, sigma_n * ratio};
        const auto pop = sample_population(nominal, spec, n_cells, seed);
        const auto recs = sd_sweep(pop, env, ramp, opts, tolerance, workers);
        ++out.iterations;
        return fraction_within(recs, threshold);
    };

    // The within-threshold fraction falls as sigma grows. Bracket first,
    // starting from the current sigma.
    double lo = base.sigma_vth_n > 0.0 ? base.sigma_vth_n : 0.02;
    double f_lo = evaluate(lo);
    double hi = lo;
    double f_hi = f_lo;
    auto finish = [&](double s, double f) {
        out.sigma_vth_n = s;
        out.sigma_vth_p = s * ratio;
        out.achieved_within = f;
        return out;
    };
    if (std::abs(f_lo - target_within) <= fraction_tolerance)
        return finish(lo, f_lo);
    if (f_lo < target_within) {
        while (f_lo < target_within) {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            f_lo = evaluate(lo);
            if (out.iterations > max_iterations)
                throw Error(ErrorCode::NoConvergence, "could not bracket sigma");
        }
    } else {
        while (f_hi > target_within) {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = evaluate(hi);
            if (out.iterations > max_iterations)
                throw Error(ErrorCode::NoConvergence, "could not bracket sigma");
        }
    }
    for (;;) {
        if (std::abs(f_lo - target_within) <= fraction_tolerance)
            return finish(lo, f_lo);
        if (std::abs(f_hi - target_within) <= fraction_tolerance)
            return finish(hi, f_hi);
        if (out.iterations >= max_iterations)
            return std::abs(f_lo - target_within) < std::abs(f_hi - target_within) ? finish(lo, f_lo)
                                                                                   : finish(hi, f_hi);
        const double mid = 0.5 * (lo + hi);
        const double f_mid = evaluate(mid);
        if (f_mid > target_within) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
}

} // namespace sdpuf
