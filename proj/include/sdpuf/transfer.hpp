#pragma once

#include "sdpuf/separatrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sdpuf {

/// a / (1 + exp(-k sd)); a = 1 when used as a transfer function.
struct SingleLogistic {
    double a = 1.0;
    double k = 100.0; // 1/V

    void validate() const;
    friend bool operator==(const SingleLogistic&, const SingleLogistic&) = default;
};

/// m / (1 + exp(-k1 sd)) + (1 - m) / (1 + exp(-k2 sd)).
struct DoubleLogistic {
    double m = 0.5;
    double k1 = 100.0; // 1/V
    double k2 = 1000.0; // 1/V

    void validate() const;
    friend bool operator==(const DoubleLogistic&, const DoubleLogistic&) = default;
};

using TransferModel = std::variant<SingleLogistic, DoubleLogistic>;

/// Constants fitted to the measured 65-nm memory.
inline constexpr DoubleLogistic kReferenceDouble{0.158, 101.2, 2348.0};
inline constexpr SingleLogistic kReferenceSingle{1.0, 195.4};

/// 1 / (1 + exp(-x)) without overflow for any finite x.
double logistic(double x) noexcept;

double eval_single(const SingleLogistic& model, double sd);
double eval_double(const DoubleLogistic& model, double sd);
double eval(const TransferModel& model, double sd);

/// d SUP1 / d SD at SD = 0.
double slope_at_zero(const SingleLogistic& model);
double slope_at_zero(const DoubleLogistic& model);

struct CurvePoint {
    double sd = 0.0;
    double sup = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Sorts both samples and pairs them rank by rank. Throws SizeMismatch.
std::vector<CurvePoint> quantile_pairs(std::span<const double> sd_samples,
                                       std::span<const double> sup_samples);

enum class FitObjective {
    Pairs,     // sum over points of (model(sd) - sup)^2
    Histogram, // squared differences of SUP1 relative frequencies over histogram_bins bins
};

struct FitOptions {
    FitObjective objective = FitObjective::Pairs;
    std::size_t histogram_bins = 100;
    int max_iterations = 20000; // per simplex start
    double simplex_tolerance = 1e-9;
};

struct FitResult {
    TransferModel model;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    /// The residual does not depend on the parameters (e.g. all points at sd = 0).
    bool degenerate = false;
};

/// Fits k of a unit-amplitude single logistic, simplex search from k = 100.
/// Throws NoConvergence when the iteration cap is hit.
FitResult fit_single(std::span<const CurvePoint> points, const FitOptions& options = {});

/// Fits (m, k1, k2) from four simplex starts; the output has k1 <= k2.
FitResult fit_double(std::span<const CurvePoint> points, const FitOptions& options = {});

/// Objective value of `model` on `points` under `options.objective`.
double fit_residual(const TransferModel& model, std::span<const CurvePoint> points,
                    const FitOptions& options = {});

/// SD_th >= 0 with eval(model, SD_th) = p, by bisection on [0, upper] to
/// 1e-5 V. Requires 0.5 < p < 1; throws Unreachable when eval(upper) < p.
double invert_threshold(const TransferModel& model, double p, double upper = 1.2);

/// Fraction of cells with |sd| >= invert_threshold(model, p).
double reliable_fraction(std::span<const SdRecord> records, const TransferModel& model, double p,
                         double upper = 1.2);
double reliable_fraction(std::span<const double> sd_values, const TransferModel& model, double p,
                         double upper = 1.2);

struct ThresholdRow {
    double p = 0.0;
    double sd_threshold = 0.0;
    double fraction = 0.0; // NaN when no SD population was given

    friend bool operator==(const ThresholdRow&, const ThresholdRow&) = default;
};

/// One row per probability, sorted by descending p.
std::vector<ThresholdRow> threshold_table(const TransferModel& model, std::span<const double> probabilities,
                                          std::span<const double> sd_values, double upper = 1.2);

void write_threshold_csv(std::span<const ThresholdRow> rows, const std::string& path);
std::vector<ThresholdRow> read_threshold_csv(const std::string& path);

/// n zero-mean Gaussian SD samples, drawn from the Synthetic stream of `seed`.
std::vector<double> synthetic_sd_samples(std::size_t n, double sigma, std::uint64_t seed);

/// SUP1 for each SD: the model value itself when n_trials = 0, otherwise a
/// binomial estimate over n_trials power-ups.
std::vector<double> synthetic_sup_samples(const TransferModel& model, std::span<const double> sd,
                                          std::int64_t n_trials, std::uint64_t seed);

std::string model_to_json(const FitResult& fit);
FitResult model_from_json(const std::string& text);
void save_model(const FitResult& fit, const std::string& path);
FitResult load_model(const std::string& path);

} // namespace sdpuf
