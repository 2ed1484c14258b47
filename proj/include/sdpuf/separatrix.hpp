#pragma once

#include "sdpuf/dynamics.hpp"

#include <cstdint>

namespace sdpuf {

/// Default bisection tolerance on the flip voltage (V).
inline constexpr double kDefaultBisectionTolerance = 5e-5;

/// Signed separatrix distance of one cell. Positive means biased towards S1.
struct SdRecord {
    std::int64_t cell_id = 0;
    double sd = 0.0;            // V, signed
    StateLabel bias = StateLabel::Unsettled;
    double flip_voltage = 0.0;  // V, = |sd|
    int iterations = 0;
    bool converged = true;

    friend bool operator==(const SdRecord&, const SdRecord&) = default;
};

struct FlipSearchResult {
    double flip_voltage = 0.0; // smallest axis voltage observed to flip
    double kept_voltage = 0.0; // largest axis voltage observed not to flip
    int iterations = 0;
    bool converged = false;    // false: even vdd does not flip (NO_FLIP)
};

/// Starting point on the axis explored for a given bias: (v, 0) for S1,
/// (0, v) for S0.
StateVector flip_axis_point(StateLabel bias, double v);

/// Minimal axis offset that makes the cell start up opposite to `bias`,
/// by bisection on the "flips" predicate. UNSETTLED counts as not flipped.
FlipSearchResult flip_search(const CellInstance& cell, const CellEnvironment& env, StateLabel bias,
                             const RampSpec& ramp, const IntegratorOptions& opts = {},
                             double tolerance = kDefaultBisectionTolerance);

/// Test 0 followed by the flip search, with the SD sign convention applied.
SdRecord compute_sd(const CellInstance& cell, const CellEnvironment& env, const RampSpec& ramp,
                    const IntegratorOptions& opts = {}, double tolerance = kDefaultBisectionTolerance);

/// Brute-force reference: scans axis points 0, g, 2g, ... up to vdd and
/// returns the first flipping one, signed. Throws NoFlip if none flips.
double sd_oracle(const CellInstance& cell, const CellEnvironment& env, const RampSpec& ramp,
                 double grid_step, const IntegratorOptions& opts = {});

} // namespace sdpuf
