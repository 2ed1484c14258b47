#pragma once

#include "sdpuf/device.hpp"
#include "sdpuf/state.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace sdpuf {

enum class RampShape { Linear, Step };

/// Supply ramp for V_BIAS: 0 -> vdd over ramp_time, then held until hold_time.
struct RampSpec {
    RampShape shape = RampShape::Step;
    double ramp_time = 1e-9; // s, ignored for Step
    double hold_time = 50e-9; // s, total simulated time

    void validate() const;
    double vbias_at(double t, double vdd) const noexcept;
    double settled_after() const noexcept { return shape == RampShape::Step ? 0.0 : ramp_time; }
};

enum class StateLabel { S0, S1, Unsettled };

const char* to_string(StateLabel label) noexcept;
StateLabel parse_state_label(const std::string& text);
inline StateLabel opposite(StateLabel l) noexcept
{
    return l == StateLabel::S0 ? StateLabel::S1 : (l == StateLabel::S1 ? StateLabel::S0 : l);
}

/// Numerical settings shared by all transient and equilibrium computations.
struct IntegratorOptions {
    double time_step = 1e-12;           // s, fixed RK4 step
    double settle_voltage = 1e-3;       // V, distance to a stable corner
    double settle_derivative = 1e4;     // V/s, |dV/dt| bound for settling
    double equilibrium_tolerance = 1e4; // V/s, residual accepted from Newton
    double jacobian_step = 1e-5;        // V, central-difference step
    int max_newton_iterations = 100;
    std::size_t trajectory_decimation = 10;

    void validate() const;
};

struct IntegrationResult {
    StateLabel label = StateLabel::Unsettled;
    StateVector final_state;
    double elapsed = 0.0; // s
    std::size_t steps = 0;
    std::vector<StateVector> trajectory; // decimated, empty unless requested
};

/// Integrates the start-up transient from `initial` under the supply ramp.
/// Never throws for dynamical outcomes: an unresolved start is UNSETTLED.
IntegrationResult integrate_from(const CellInstance& cell, const CellEnvironment& env,
                                 StateVector initial, const RampSpec& ramp,
                                 const IntegratorOptions& opts = {}, bool record_trajectory = false);

/// Test 0: the transient from (0, 0), which reveals the cell's bias.
StateLabel startup_test0(const CellInstance& cell, const CellEnvironment& env,
                         const RampSpec& ramp, const IntegratorOptions& opts = {});

struct Jacobian2 {
    double a = 0, b = 0, c = 0, d = 0; // [[a, b], [c, d]]
};

Jacobian2 numerical_jacobian(const CellInstance& cell, StateVector s, const CellEnvironment& env,
                             double h);

struct EquilibriumSet {
    StateVector s0;
    StateVector s1;
    StateVector metastable;
};

/// Damped Newton from the ideal corners and from (vdd/2, vdd/2).
/// Throws NoConvergence on failure.
EquilibriumSet find_equilibria(const CellInstance& cell, const CellEnvironment& env,
                               const IntegratorOptions& opts = {});

/// Stable manifold of the metastable saddle, ordered from the low-voltage end
/// (near the origin) to the high-voltage end, with at least n_points samples.
std::vector<StateVector> trace_separatrix(const CellInstance& cell, const CellEnvironment& env,
                                          std::size_t n_points, const IntegratorOptions& opts = {});

enum class Axis { VQ, VQB };

/// Distance from the origin at which a polyline crosses the given axis
/// (Axis::VQ means the line v_qb = 0). Empty if it never crosses at >= 0.
std::optional<double> axis_intercept(const std::vector<StateVector>& polyline, Axis axis);

/// Minimum distance from a point to a polyline.
double distance_to_polyline(const std::vector<StateVector>& polyline, StateVector p);

struct ButterflySnm {
    double lobe_s0 = 0.0; // V, square in the lobe around (vdd, 0)
    double lobe_s1 = 0.0; // V, square in the lobe around (0, vdd)
    double snm() const noexcept { return lobe_s0 < lobe_s1 ? lobe_s0 : lobe_s1; }
};

/// Output of the inverter driving `node` for a given input, by bisection on
/// the node's current balance at vbias = vdd.
double inverter_output(const TransistorInstance& pull_up, const TransistorInstance& pull_down,
                       double v_in, double vdd);

/// Hold static noise margin from the butterfly curve (largest inscribed
/// square per lobe, found along the 45-degree rotated frame).
ButterflySnm butterfly_snm(const CellInstance& cell, const CellEnvironment& env,
                           std::size_t vtc_points = 1201);

double hold_snm(const CellInstance& cell, const CellEnvironment& env);

} // namespace sdpuf
