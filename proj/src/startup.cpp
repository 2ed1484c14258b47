#include "sdpuf/startup.hpp"

#include "sdpuf/error.hpp"
#include "sdpuf/io.hpp"
#include "sdpuf/parallel.hpp"
#include "sdpuf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace sdpuf {

void NoiseSpec::validate() const
{
    if (!(sigma_init >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "sigma_init must be >= 0");
}

StartupRecord StartupRecord::from_counts(std::int64_t cell_id, std::int64_t n_ones, std::int64_t n_trials)
{
    if (n_trials < 1)
        throw Error(ErrorCode::Malformed, "n_trials must be >= 1");
    if (n_ones < 0 || n_ones > n_trials)
        throw Error(ErrorCode::Malformed, "n_ones must lie in [0, n_trials]");
    StartupRecord r;
    r.cell_id = cell_id;
    r.n_trials = n_trials;
    r.n_ones = n_ones;
    r.n_zeros = n_trials - n_ones;
    const auto n = static_cast<double>(n_trials);
    r.sup1 = static_cast<double>(r.n_ones) / n;
    r.sup0 = static_cast<double>(r.n_zeros) / n;
    return r;
}

void StartupDataset::validate() const
{
    if (records.size() != rows * cols)
        throw Error(ErrorCode::Malformed, "record count " + std::to_string(records.size())
                                              + " does not match " + std::to_string(rows) + "x"
                                              + std::to_string(cols));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.cell_id != static_cast<std::int64_t>(i))
            throw Error(ErrorCode::Malformed, "cell_id " + std::to_string(r.cell_id) + " out of order");
        if (r.n_ones + r.n_zeros != r.n_trials || r.n_trials < 1)
            throw Error(ErrorCode::Malformed, "counts of cell " + std::to_string(i) + " are inconsistent");
    }
}

std::vector<double> StartupDataset::sup1_values() const
{
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records)
        v.push_back(r.sup1);
    return v;
}

namespace {

struct Outcome {
    StateLabel label = StateLabel::Unsettled;
    StateVector final_state;
};

// Outcome cache for one cell: exact repeats plus order-dominance witnesses.
class OutcomeResolver {
public:
    OutcomeResolver(const CellInstance& cell, const CellEnvironment& env, const RampSpec& ramp,
                    const IntegratorOptions& opts, bool exhaustive)
        : cell_(cell), env_(env), ramp_(ramp), opts_(opts), exhaustive_(exhaustive)
    {
    }

    Outcome resolve(StateVector p)
    {
        if (!exhaustive_) {
            if (auto it = memo_.find({p.v_q, p.v_qb}); it != memo_.end())
                return it->second;
            for (const StateVector& w : s1_)
                if (p.v_q <= w.v_q && p.v_qb >= w.v_qb)
                    return {StateLabel::S1, {0.0, env_.vdd}};
            for (const StateVector& w : s0_)
                if (p.v_q >= w.v_q && p.v_qb <= w.v_qb)
                    return {StateLabel::S0, {env_.vdd, 0.0}};
        }
        const IntegrationResult r = integrate_from(cell_, env_, p, ramp_, opts_);
        ++transients_;
        const Outcome o{r.label, r.final_state};
        if (!exhaustive_) {
            memo_.emplace(std::pair{p.v_q, p.v_qb}, o);
            if (o.label == StateLabel::S1)
                add_witness(s1_, p, [](StateVector w, StateVector q) { return w.v_q <= q.v_q && w.v_qb >= q.v_qb; });
            else if (o.label == StateLabel::S0)
                add_witness(s0_, p, [](StateVector w, StateVector q) { return w.v_q >= q.v_q && w.v_qb <= q.v_qb; });
        }
        return o;
    }

    std::size_t transients() const noexcept { return transients_; }

private:
    template <class Covered>
    static void add_witness(std::vector<StateVector>& set, StateVector p, Covered covered)
    {
        std::erase_if(set, [&](StateVector w) { return covered(w, p); });
        set.push_back(p);
    }

    const CellInstance& cell_;
    const CellEnvironment& env_;
    const RampSpec& ramp_;
    const IntegratorOptions& opts_;
    bool exhaustive_;
    std::map<std::pair<double, double>, Outcome> memo_;
    std::vector<StateVector> s1_;
    std::vector<StateVector> s0_;
    std::size_t transients_ = 0;
};

StateVector perturbed_start(std::uint64_t seed, std::int64_t cell_id, std::int64_t trial, int retry,
                            double sigma, double vdd)
{
    CounterRng rng(seed, StreamTag::Startup,
                   {static_cast<std::uint64_t>(cell_id), static_cast<std::uint64_t>(trial),
                    static_cast<std::uint64_t>(retry)});
    std::normal_distribution<double> z(0.0, 1.0);
    const double a = sigma * z(rng);
    const double b = sigma * z(rng);
    return {std::clamp(a, 0.0, vdd), std::clamp(b, 0.0, vdd)};
}

} // namespace

SupSimulation simulate_sup(const CellInstance& cell, const CellEnvironment& env, const RampSpec& ramp,
                           const NoiseSpec& noise, std::int64_t n_trials, std::uint64_t seed,
                           const IntegratorOptions& opts, const SupOptions& sup)
{
    noise.validate();
    if (n_trials < 1)
        throw Error(ErrorCode::InvalidArgument, "n_trials must be >= 1");
    const double vdd = env.vdd;
    OutcomeResolver resolver(cell, env, ramp, opts, sup.exhaustive);

    std::vector<StateVector> first(static_cast<std::size_t>(n_trials));
    for (std::int64_t t = 0; t < n_trials; ++t)
        first[static_cast<std::size_t>(t)] = perturbed_start(seed, cell.cell_id, t, 0, noise.sigma_init, vdd);

    if (!sup.exhaustive) {
        // The order-extreme corners of the trial cloud: if the greatest one
        // already settles in S1 (or the least in S0) every trial does.
        StateVector greatest{0.0, vdd};
        StateVector least{vdd, 0.0};
        for (const StateVector& p : first) {
            greatest = {std::max(greatest.v_q, p.v_q), std::min(greatest.v_qb, p.v_qb)};
            least = {std::min(least.v_q, p.v_q), std::max(least.v_qb, p.v_qb)};
        }
        if (resolver.resolve(greatest).label != StateLabel::S1)
            resolver.resolve(least);
    }

    SupSimulation out;
    if (sup.keep_trial_bits)
        out.trial_bits.reserve(static_cast<std::size_t>(n_trials));
    std::int64_t ones = 0;
    for (std::int64_t t = 0; t < n_trials; ++t) {
        Outcome o = resolver.resolve(first[static_cast<std::size_t>(t)]);
        for (int retry = 1; o.label == StateLabel::Unsettled && retry <= sup.max_retries; ++retry)
            o = resolver.resolve(perturbed_start(seed, cell.cell_id, t, retry, noise.sigma_init, vdd));
        bool one = o.label == StateLabel::S1;
        if (o.label == StateLabel::Unsettled) {
            ++out.retry_exhausted;
            one = o.final_state.v_qb > o.final_state.v_q;
        }
        ones += one ? 1 : 0;
        if (sup.keep_trial_bits)
            out.trial_bits.push_back(one ? '1' : '0');
    }
    out.record = StartupRecord::from_counts(cell.cell_id, ones, n_trials);
    out.transients = resolver.transients();
    return out;
}

SimulatedStartup simulate_dataset(std::span<const CellInstance> population, std::size_t rows,
                                  std::size_t cols, const CellEnvironment& env, const RampSpec& ramp,
                                  const NoiseSpec& noise, std::int64_t n_trials, std::uint64_t seed,
                                  const IntegratorOptions& opts, const SupOptions& sup, unsigned workers)
{
    if (population.size() != rows * cols)
        throw Error(ErrorCode::SizeMismatch, "population size does not match rows x cols");
    if (population.empty())
        throw Error(ErrorCode::EmptySet, "population is empty");
    std::vector<SupSimulation> sims(population.size());
    parallel_for(population.size(), workers, [&](std::size_t i) {
        sims[i] = simulate_sup(population[i], env, ramp, noise, n_trials, seed, opts, sup);
    });
    SimulatedStartup out;
    out.dataset.rows = rows;
    out.dataset.cols = cols;
    out.dataset.source = DataSource::Simulated;
    out.dataset.records.reserve(sims.size());
    for (std::size_t i = 0; i < sims.size(); ++i) {
        StartupRecord r = sims[i].record;
        r.cell_id = static_cast<std::int64_t>(i);
        out.dataset.records.push_back(r);
        out.retry_exhausted += sims[i].retry_exhausted;
        out.transients += sims[i].transients;
        if (sup.keep_trial_bits)
            out.trial_bits.push_back(std::move(sims[i].trial_bits));
    }
    return out;
}

namespace {

[[noreturn]] void malformed(const std::string& path, std::size_t line, const std::string& what)
{
    throw Error(ErrorCode::Malformed, path + ":" + std::to_string(line) + ": " + what);
}

StartupDataset ingest_counts(const std::string& path, const std::vector<std::string>& lines,
                             std::optional<Geometry> geometry)
{
    std::map<std::int64_t, StartupRecord> by_id;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string_view line = io::trim(lines[i]);
        if (line.empty())
            continue;
        const auto f = io::split(line, ',');
        std::int64_t id = 0, ones = 0, trials = 0;
        if (f.size() != 3 || !io::parse_int(f[0], id) || !io::parse_int(f[1], ones)
            || !io::parse_int(f[2], trials))
            malformed(path, i + 1, "expected cell_id,n_ones,n_trials");
        if (trials < 1)
            malformed(path, i + 1, "n_trials must be >= 1");
        if (ones < 0 || ones > trials)
            malformed(path, i + 1, "n_ones + n_zeros != n_trials (n_ones out of range)");
        if (id < 0)
            malformed(path, i + 1, "negative cell_id");
        if (!by_id.emplace(id, StartupRecord::from_counts(id, ones, trials)).second)
            malformed(path, i + 1, "duplicate cell_id " + std::to_string(id));
    }
    StartupDataset ds;
    ds.source = DataSource::Measured;
    for (auto& [id, rec] : by_id) {
        if (id != static_cast<std::int64_t>(ds.records.size()))
            malformed(path, 0, "cell ids are not contiguous from 0 (missing " + std::to_string(ds.records.size()) + ")");
        ds.records.push_back(rec);
    }
    if (geometry) {
        ds.rows = geometry->rows;
        ds.cols = geometry->cols;
    } else {
        ds.rows = ds.records.size();
        ds.cols = 1;
    }
    if (ds.records.size() != ds.rows * ds.cols)
        malformed(path, 0, "dimension mismatch: " + std::to_string(ds.records.size()) + " cells for "
                               + std::to_string(ds.rows) + "x" + std::to_string(ds.cols));
    return ds;
}

StartupDataset ingest_bitmap(const std::string& path, const std::vector<std::string>& lines,
                             std::optional<Geometry> geometry)
{
    const auto head = io::split(io::trim(lines[0]), ' ');
    std::vector<std::int64_t> dims;
    for (auto tok : head) {
        if (io::trim(tok).empty())
            continue;
        std::int64_t v = 0;
        if (!io::parse_int(tok, v) || v < 1)
            malformed(path, 1, "expected header 'rows cols trials'");
        dims.push_back(v);
    }
    if (dims.size() != 3)
        malformed(path, 1, "expected header 'rows cols trials'");
    StartupDataset ds;
    ds.source = DataSource::Measured;
    ds.rows = static_cast<std::size_t>(dims[0]);
    ds.cols = static_cast<std::size_t>(dims[1]);
    const std::int64_t trials = dims[2];
    if (geometry && (geometry->rows != ds.rows || geometry->cols != ds.cols))
        malformed(path, 1, "header geometry differs from the requested one");
    const std::size_t n = ds.rows * ds.cols;
    std::size_t body = lines.size() - 1;
    while (body > 0 && io::trim(lines[body]).empty())
        --body;
    if (body != n)
        malformed(path, lines.size(), "dimension mismatch: expected " + std::to_string(n) + " cell lines, found "
                                          + std::to_string(body));
    ds.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string_view bits = io::trim(lines[i + 1]);
        if (static_cast<std::int64_t>(bits.size()) != trials)
            malformed(path, i + 2, "expected " + std::to_string(trials) + " trial bits");
        std::int64_t ones = 0;
        for (char c : bits) {
            if (c == '1')
                ++ones;
            else if (c != '0')
                malformed(path, i + 2, "trial bits must be '0' or '1'");
        }
        ds.records.push_back(StartupRecord::from_counts(static_cast<std::int64_t>(i), ones, trials));
    }
    return ds;
}

} // namespace

StartupDataset ingest_dataset(const std::string& path, std::optional<Geometry> geometry)
{
    const std::vector<std::string> lines = io::read_lines(path);
    if (lines.empty())
        malformed(path, 1, "empty file");
    StartupDataset ds;
    if (io::trim(lines[0]) == "cell_id,n_ones,n_trials")
        ds = ingest_counts(path, lines, geometry);
    else
        ds = ingest_bitmap(path, lines, geometry);
    if (ds.records.empty())
        malformed(path, 1, "no cells");
    ds.validate();
    return ds;
}

void write_counts_csv(const StartupDataset& dataset, const std::string& path)
{
    auto out = io::open_output(path);
    out << "cell_id,n_ones,n_trials\n";
    for (const auto& r : dataset.records)
        out << r.cell_id << ',' << r.n_ones << ',' << r.n_trials << '\n';
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

void write_bitmap(std::size_t rows, std::size_t cols, std::span<const std::string> trial_bits,
                  const std::string& path)
{
    if (trial_bits.size() != rows * cols || trial_bits.empty())
        throw Error(ErrorCode::SizeMismatch, "bitmap needs one bit string per cell");
    auto out = io::open_output(path);
    out << rows << ' ' << cols << ' ' << trial_bits.front().size() << '\n';
    for (const auto& b : trial_bits) {
        if (b.size() != trial_bits.front().size())
            throw Error(ErrorCode::SizeMismatch, "all cells need the same number of trials");
        out << b << '\n';
    }
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

RegionFractions classify_regions(const StartupDataset& dataset, double low, double high)
{
    if (!(low >= 0.0 && low < high && high <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "need 0 <= low < high <= 1");
    if (dataset.records.empty())
        throw Error(ErrorCode::EmptySet, "dataset is empty");
    std::size_t a0 = 0, a1 = 0;
    for (const auto& r : dataset.records) {
        if (r.sup1 <= low)
            ++a0;
        else if (r.sup1 >= high)
            ++a1;
    }
    const auto n = static_cast<double>(dataset.records.size());
    const std::size_t b = dataset.records.size() - a0 - a1;
    return {static_cast<double>(a0) / n, static_cast<double>(b) / n, static_cast<double>(a1) / n};
}

double cell_ber(const StartupRecord& record)
{
    return std::min(record.sup1, record.sup0);
}

double mean_ber(const StartupDataset& dataset)
{
    if (dataset.records.empty())
        throw Error(ErrorCode::EmptySet, "dataset is empty");
    double sum = 0.0;
    for (const auto& r : dataset.records)
        sum += cell_ber(r);
    return sum / static_cast<double>(dataset.records.size());
}

void write_spatial_map(const StartupDataset& dataset, const std::string& path)
{
    dataset.validate();
    auto out = io::open_output(path);
    for (std::size_t r = 0; r < dataset.rows; ++r) {
        for (std::size_t c = 0; c < dataset.cols; ++c) {
            if (c)
                out << ',';
            out << io::format_double(dataset.records[r * dataset.cols + c].sup1);
        }
        out << '\n';
    }
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

std::vector<std::vector<double>> read_spatial_map(const std::string& path)
{
    std::vector<std::vector<double>> m;
    const auto lines = io::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty())
            continue;
        std::vector<double> row;
        for (auto f : io::split(lines[i], ',')) {
            double v = 0.0;
            if (!io::parse_double(f, v))
                malformed(path, i + 1, "expected a number");
            row.push_back(v);
        }
        if (!m.empty() && row.size() != m.front().size())
            malformed(path, i + 1, "ragged row");
        m.push_back(std::move(row));
    }
    return m;
}

NoiseCalibration calibrate_sigma_init(std::span<const CellInstance> population,
                                      const CellEnvironment& env, const RampSpec& ramp,
                                      std::int64_t n_trials, std::uint64_t seed, double low, double high,
                                      double target_b, const IntegratorOptions& opts, unsigned workers,
                                      double fraction_tolerance, int max_iterations)
{
    if (!(target_b > 0.0 && target_b < 1.0))
        throw Error(ErrorCode::InvalidArgument, "target B mass must lie in (0, 1)");
    NoiseCalibration out;
    auto b_mass = [&](double sigma) {
        ++out.iterations;
        const auto sim = simulate_dataset(population, population.size(), 1, env, ramp, NoiseSpec{sigma},
                                          n_trials, seed, opts, {}, workers);
        return classify_regions(sim.dataset, low, high).b;
    };
    double lo = std::log(1e-6);
    double hi = std::log(0.1);
    double f_lo = b_mass(std::exp(lo));
    double f_hi = b_mass(std::exp(hi));
    if (f_lo > target_b || f_hi < target_b)
        throw Error(ErrorCode::NoConvergence, "B-region target not bracketed by sigma_init in [1 uV, 100 mV]");
    for (;;) {
        const double mid = 0.5 * (lo + hi);
        const double f = b_mass(std::exp(mid));
        if (std::abs(f - target_b) <= fraction_tolerance || out.iterations >= max_iterations) {
            out.sigma_init = std::exp(mid);
            out.achieved_b = f;
            return out;
        }
        if (f < target_b)
            lo = mid;
        else
            hi = mid;
    }
}

} // namespace sdpuf
