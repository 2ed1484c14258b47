#pragma once

#include "sdpuf/config.hpp"
#include "sdpuf/error.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sdpuf {

/// Files a command wrote plus its JSON summary (also written to disk).
struct CommandResult {
    std::vector<std::string> files;
    std::string summary_json;
};

/// Samples rows x cols cells, runs the SD sweep and writes sd.csv,
/// sd_histogram.csv, exceedance.csv and population_summary.json.
CommandResult cmd_population(const RunConfig& config, const std::string& out_dir);

struct StartupOptions {
    std::optional<std::string> ingest_path; // measured data instead of emulation
    std::optional<Geometry> geometry;       // for counts files
    bool write_bitmap = false;              // emulation only: per-trial bits
    std::size_t reads = 0;                  // sampled read-outs written to responses.csv
};

/// Emulates (or ingests) the power-up statistics and writes counts.csv,
/// sup_histogram.csv, spatial_map.csv and startup_report.json.
CommandResult cmd_startup(const RunConfig& config, const StartupOptions& options, const std::string& out_dir);

/// Quantile-pairs an SD file with a SUP file (counts or bitmap) and fits both
/// logistic models.
CommandResult cmd_fit(const RunConfig& config, const std::string& sd_file, const std::string& sup_file,
                      const std::string& out_dir);

/// Threshold table for a saved model; the cell column needs an SD file.
CommandResult cmd_thresholds(const std::string& model_file, const std::vector<double>& probabilities,
                             const std::optional<std::string>& sd_file, double upper, const std::string& out_dir);

CommandResult cmd_metrics(const std::vector<std::string>& response_files, const std::string& out_dir);

/// Fits sigma_vth to the SD mass target, then sigma_init to the B-region
/// target, and writes calibrated_config.json.
CommandResult cmd_calibrate(const RunConfig& config, const std::string& out_dir);

/// Process exit status for an error category.
int exit_code(ErrorCode code) noexcept;

} // namespace sdpuf
