#pragma once

#include "sdpuf/dynamics.hpp"
#include "sdpuf/variation.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdpuf {

/// Per-trial Gaussian perturbation of the initial node voltages.
struct NoiseSpec {
    double sigma_init = 2.2e-3; // V, calibrated to an 8% B region

    void validate() const;
};

/// Start-up statistics of one cell: N, N1, N0, SUP1 = N1/N and SUP0 = N0/N.
struct StartupRecord {
    std::int64_t cell_id = 0;
    std::int64_t n_trials = 0;
    std::int64_t n_ones = 0;
    std::int64_t n_zeros = 0;
    double sup1 = 0.0;
    double sup0 = 0.0;

    /// Throws Malformed unless 0 <= n_ones <= n_trials and n_trials >= 1.
    static StartupRecord from_counts(std::int64_t cell_id, std::int64_t n_ones, std::int64_t n_trials);

    friend bool operator==(const StartupRecord&, const StartupRecord&) = default;
};

enum class DataSource { Simulated, Measured };

/// A rows x cols memory; records[i] is the cell at row i / cols, col i % cols.
struct StartupDataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<StartupRecord> records;
    DataSource source = DataSource::Measured;

    void validate() const;
    std::size_t size() const noexcept { return records.size(); }
    std::vector<double> sup1_values() const;
};

struct SupOptions {
    int max_retries = 10;
    /// Simulate every perturbed start individually. When false, outcomes
    /// implied by already simulated starts are reused (see simulate_sup).
    bool exhaustive = false;
    bool keep_trial_bits = false;
};

struct SupSimulation {
    StartupRecord record;
    std::size_t retry_exhausted = 0; // trials resolved by the final-state sign
    std::size_t transients = 0;      // transients actually integrated
    std::string trial_bits;          // '0'/'1' per trial when requested
};

/// Emulates n_trials noisy power-ups of one cell.
///
/// Each trial starts from (0, 0) plus an independent Gaussian offset per node
/// (clamped to [0, vdd]) drawn from the stream (seed, cell_id, trial, retry).
/// UNSETTLED trials are redrawn up to max_retries times, then counted by the
/// sign of v_q - v_qb at hold_time.
///
/// The latch is a competitive system: dV_Q/dt falls with V_QB and vice
/// versa. Its flow therefore preserves the order
///   p <= q  iff  p.v_q <= q.v_q and p.v_qb >= q.v_qb,
/// whose least and greatest points are S1 and S0. A start dominated by one
/// that settled in S1 also settles in S1 (symmetrically for S0), so unless
/// `exhaustive` is set, such starts reuse the known outcome instead of being
/// integrated again. Counts are identical either way.
SupSimulation simulate_sup(const CellInstance& cell, const CellEnvironment& env, const RampSpec& ramp,
                           const NoiseSpec& noise, std::int64_t n_trials, std::uint64_t seed,
                           const IntegratorOptions& opts = {}, const SupOptions& sup = {});

struct SimulatedStartup {
    StartupDataset dataset;
    std::size_t retry_exhausted = 0;
    std::size_t transients = 0;
    std::vector<std::string> trial_bits; // per cell, when requested
};

/// simulate_sup over a rows x cols population (in population order).
SimulatedStartup simulate_dataset(std::span<const CellInstance> population, std::size_t rows,
                                  std::size_t cols, const CellEnvironment& env, const RampSpec& ramp,
                                  const NoiseSpec& noise, std::int64_t n_trials, std::uint64_t seed,
                                  const IntegratorOptions& opts = {}, const SupOptions& sup = {},
                                  unsigned workers = 0);

struct Geometry {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// Reads a counts CSV (header "cell_id,n_ones,n_trials") or a trial bitmap
/// (header "rows cols trials", then one line of '0'/'1' per cell). Counts
/// files carry no geometry: pass one, or get rows = cells, cols = 1.
/// Throws Malformed with the offending line number.
StartupDataset ingest_dataset(const std::string& path, std::optional<Geometry> geometry = std::nullopt);

void write_counts_csv(const StartupDataset& dataset, const std::string& path);
void write_bitmap(std::size_t rows, std::size_t cols, std::span<const std::string> trial_bits,
                  const std::string& path);

struct RegionFractions {
    double a0 = 0.0; // sup1 <= low
    double b = 0.0;
    double a1 = 0.0; // sup1 >= high
};

inline constexpr double kDefaultRegionLow = 0.09;
inline constexpr double kDefaultRegionHigh = 0.91;

RegionFractions classify_regions(const StartupDataset& dataset, double low = kDefaultRegionLow,
                                 double high = kDefaultRegionHigh);

/// Probability of not starting at the preferred value: min(SUP1, SUP0).
double cell_ber(const StartupRecord& record);
double mean_ber(const StartupDataset& dataset);

/// rows lines of cols comma-separated SUP1 values (shortest round-trip form).
void write_spatial_map(const StartupDataset& dataset, const std::string& path);
std::vector<std::vector<double>> read_spatial_map(const std::string& path);

struct NoiseCalibration {
    double sigma_init = 0.0;
    double achieved_b = 0.0;
    int iterations = 0;
};

/// Bisection (in log sigma) on the noise magnitude until the B-region mass of
/// the emulated dataset matches target_b.
NoiseCalibration calibrate_sigma_init(std::span<const CellInstance> population,
                                      const CellEnvironment& env, const RampSpec& ramp,
                                      std::int64_t n_trials, std::uint64_t seed, double low, double high,
                                      double target_b, const IntegratorOptions& opts, unsigned workers,
                                      double fraction_tolerance = 0.002, int max_iterations = 40);

} // namespace sdpuf
