#pragma once

#include "sdpuf/device.hpp"
#include "sdpuf/dynamics.hpp"
#include "sdpuf/startup.hpp"
#include "sdpuf/transfer.hpp"
#include "sdpuf/variation.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sdpuf {

struct CalibrationTargets {
    std::size_t cells = 4096;     // population prefix used while searching
    double sd_threshold = 0.04;   // V
    double target_within = 0.906; // fraction with |sd| < sd_threshold
    double target_b_mass = 0.08;  // SUP1 histogram mass strictly between the regions
    int noise_trials = 1000;
};

/// Everything a pipeline run depends on. Defaults describe a 256 x 64 memory
/// at 1.2 V with 1000 power-ups per cell.
struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t rows = 256;
    std::size_t cols = 64;
    DeviceConfig device;
    MismatchSpec mismatch;
    RampSpec ramp;
    IntegratorOptions integrator;
    NoiseSpec noise;
    std::int64_t n_trials = 1000;
    double bisection_tol = kDefaultBisectionTolerance;
    double region_low = kDefaultRegionLow;
    double region_high = kDefaultRegionHigh;
    FitOptions fit;
    std::size_t histogram_bins = 100;
    double histogram_range = 0.1; // V, SD histogram spans [-range, range]
    std::vector<double> threshold_probabilities{0.99, 0.98, 0.95};
    CalibrationTargets calibration;
    std::string output_dir = "out";
    unsigned workers = 0;

    std::size_t cells() const noexcept { return rows * cols; }
    void validate() const;
};

/// Parses a config document. Keys are optional; unknown keys are rejected
/// with Malformed naming the key path.
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "SDPUF_CONFIG";

} // namespace sdpuf
