#pragma once

#include "sdpuf/startup.hpp"
#include "sdpuf/transfer.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdpuf {

/// One read-out of a PUF: bits[i] is cell i (0 or 1).
struct PufResponse {
    std::string chip_id;
    std::vector<std::uint8_t> bits;

    friend bool operator==(const PufResponse&, const PufResponse&) = default;
};

struct CellMask {
    std::vector<std::uint8_t> selected; // 1 = cell used by the PUF
    std::size_t selected_count = 0;

    double selected_fraction() const noexcept;
};

std::size_t hamming_distance(const PufResponse& a, const PufResponse& b);

/// Mean pairwise inter-chip fractional Hamming distance, in percent.
double uniqueness(std::span<const PufResponse> responses);
/// Percentage of 1 bits.
double uniformity(const PufResponse& response);
/// Uniformity averaged over responses of equal length.
double mean_uniformity(std::span<const PufResponse> responses);
/// Mean over bit positions of the across-chip 1 rate, in percent.
double bit_aliasing(std::span<const PufResponse> responses);
/// 100 minus the mean fractional Hamming distance of repeats to the reference.
double reliability(const PufResponse& reference, std::span<const PufResponse> repeats);

/// Cells with max(sup1, sup0) >= p_threshold.
CellMask select_mask(const StartupDataset& dataset, double p_threshold);
/// Cells with |sd| >= invert_threshold(model, p_threshold).
CellMask select_mask(std::span<const SdRecord> records, const TransferModel& model, double p_threshold,
                     double upper = 1.2);

PufResponse apply_mask(const PufResponse& response, const CellMask& mask);

/// One read-out of the memory: cell i powers up to 1 with probability sup1,
/// drawn from the stream (seed, read_index, i).
PufResponse sample_response(const StartupDataset& dataset, std::uint64_t seed, std::uint64_t read_index,
                            std::string chip_id);

/// Reads a response CSV: header "chip_id,bits", then one row per read-out.
std::vector<PufResponse> read_responses(const std::string& path);
void write_responses(std::span<const PufResponse> responses, const std::string& path);

struct MetricValue {
    std::optional<double> value; // empty when it needs more responses than given
    double ideal = 0.0;
};

struct MetricsReport {
    std::size_t responses = 0;
    std::size_t bits = 0;
    MetricValue uniqueness{std::nullopt, 50.0};
    MetricValue uniformity{std::nullopt, 50.0};
    MetricValue bit_aliasing{std::nullopt, 50.0};
    MetricValue reliability{std::nullopt, 100.0};
};

/// Uniformity is averaged over all responses. Uniqueness and bit aliasing use
/// the first response of each chip; reliability compares every further
/// response of a chip with its first one.
MetricsReport metrics_report(std::span<const PufResponse> responses);
std::string metrics_report_json(const MetricsReport& report);

} // namespace sdpuf
