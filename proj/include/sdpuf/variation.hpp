#pragma once

#include "sdpuf/separatrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sdpuf {

/// Independent Gaussian threshold-voltage mismatch per transistor.
struct MismatchSpec {
    double sigma_vth_n = 0.0182; // V
    double sigma_vth_p = 0.0182; // V

    void validate() const;
};

/// Cell i of a population; its offsets depend only on (seed, i).
CellInstance sample_cell(const CellInstance& nominal, const MismatchSpec& spec, std::uint64_t seed,
                         std::int64_t index);

std::vector<CellInstance> sample_population(const CellInstance& nominal, const MismatchSpec& spec,
                                            std::size_t n, std::uint64_t seed);

/// compute_sd over a population, in population order, on `workers` threads
/// (0 = all cores). Output is identical for any worker count.
std::vector<SdRecord> sd_sweep(std::span<const CellInstance> population, const CellEnvironment& env,
                               const RampSpec& ramp, const IntegratorOptions& opts = {},
                               double tolerance = kDefaultBisectionTolerance, unsigned workers = 0);

/// Fraction of records with |sd| >= threshold. Throws EmptySet on no input.
double exceedance(std::span<const SdRecord> records, double threshold);
double exceedance(std::span<const double> sd_values, double threshold);

/// Fraction with |sd| < threshold, i.e. 1 - exceedance.
double fraction_within(std::span<const SdRecord> records, double threshold);

struct Histogram {
    std::vector<double> bin_edges;      // n_bins + 1, strictly increasing
    std::vector<std::uint64_t> counts;  // n_bins
    std::uint64_t total = 0;            // samples inside the range
    std::uint64_t underflow = 0;
    std::uint64_t overflow = 0;

    std::uint64_t sample_count() const noexcept { return total + underflow + overflow; }
    /// count / all samples, including the out-of-range ones.
    double relative_frequency(std::size_t bin) const noexcept;
};

/// Uniform bins over [lo, hi]; a sample equal to hi falls in the last bin.
Histogram make_histogram(std::span<const double> samples, std::size_t n_bins, double lo, double hi);

std::vector<double> sd_values(std::span<const SdRecord> records);

/// CSV with header "cell_id,sd_volts,bias,converged,iterations".
void write_sd_csv(std::span<const SdRecord> records, const std::string& path);
std::vector<SdRecord> read_sd_csv(const std::string& path);
/// The same records as a JSON array of objects.
std::string sd_records_to_json(std::span<const SdRecord> records);

/// Per-cell threshold offsets: "cell_id,dvth_n1,...,dvth_nx2".
void write_population_csv(std::span<const CellInstance> population, const std::string& path);

/// CSV with header "bin_left,bin_right,count,relative_frequency".
void write_histogram_csv(const Histogram& histogram, const std::string& path);

struct SigmaCalibration {
    double sigma_vth_n = 0.0;
    double sigma_vth_p = 0.0;
    double achieved_within = 0.0; // fraction with |sd| < threshold
    int iterations = 0;
};

/// Bisection on the mismatch sigma (the n/p ratio of `base` is kept) until
/// the fraction of cells with |sd| < threshold matches `target_within`.
SigmaCalibration calibrate_sigma_vth(const CellInstance& nominal, const MismatchSpec& base,
                                     const CellEnvironment& env, const RampSpec& ramp,
                                     const IntegratorOptions& opts, double tolerance,
                                     std::size_t n_cells, std::uint64_t seed, double threshold,
                                     double target_within, unsigned workers,
                                     double fraction_tolerance = 0.002, int max_iterations = 30);

} // namespace sdpuf
