#pragma once

#include "sdpuf/state.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>

namespace sdpuf {

enum class Polarity { NChannel, PChannel };

/// Thermal voltage kT/q at 300 K.
inline constexpr double kThermalVoltage = 0.025852;

/// Nominal device parameters shared by every instance of one transistor type.
struct MosParams {
    Polarity polarity = Polarity::NChannel;
    double vth_nominal = 0.4;                 // V, signed (negative for p-channel)
    double transconductance_factor = 300e-6;  // A/V^2 per unit W/L
    double width = 0.15;                      // um
    double length = 0.15;                     // um
    double channel_length_modulation = 0.1;   // 1/V
    double subthreshold_slope_factor = 1.3;
    double off_leakage_scale = 1e-7;          // A, weak-inversion current scale at vgs = vth

    /// Throws InvalidArgument when an invariant is violated.
    void validate() const;

    static MosParams default_nmos();
    static MosParams default_pmos();
};

struct TransistorInstance {
    MosParams params;
    double vth_offset = 0.0; // V, sampled mismatch

    double vth() const noexcept { return params.vth_nominal + vth_offset; }
};

/// One 6T cell. Pass transistors nx1/nx2 are carried for completeness but
/// never conduct during start-up (word line held at 0 V).
struct CellInstance {
    TransistorInstance n1, n2, p1, p2, nx1, nx2;
    double node_capacitance_q = 1e-15;  // F
    double node_capacitance_qb = 1e-15; // F
    std::int64_t cell_id = 0;

    void validate() const;

    /// Relabels the two halves (n1<->n2, p1<->p2, nx1<->nx2, Q<->QB).
    CellInstance mirrored() const;

    std::array<double, 6> offsets() const noexcept
    {
        return {n1.vth_offset, n2.vth_offset, p1.vth_offset,
                p2.vth_offset, nx1.vth_offset, nx2.vth_offset};
    }
};

struct CellEnvironment {
    double vdd = 1.2;   // nominal supply
    double vbias = 1.2; // instantaneous cell supply

    void validate() const;
    CellEnvironment at_bias(double v) const noexcept { return {vdd, v}; }
};

/// Nominal cell template plus supply, as loaded from a device configuration.
struct DeviceConfig {
    MosParams nmos = MosParams::default_nmos();
    MosParams pmos = MosParams::default_pmos();
    double node_capacitance = 1e-15;
    double vdd = 1.2;

    CellInstance nominal_cell() const;
    CellEnvironment environment() const noexcept { return {vdd, vdd}; }
    void validate() const;
};

/// Drain current (A) flowing into the drain terminal. Terminal voltages are
/// passed as-is for both polarities; p-channel sign mirroring happens inside.
///
/// Channel model: strong-inversion square law built on a softplus overdrive,
///   I_s = beta/2 * (soft(vgs - vth)^2 - soft(vgs - vth - vds)^2),
///   soft(v) = 2 n Vt ln(1 + exp(v / (2 n Vt))),
/// in series (harmonic combination) with a weak-inversion exponential
///   I_w = I_0 (W/L) exp((vgs - vth) / (n Vt)) (1 - exp(-vds / Vt)),
/// times (1 + lambda |vds|). Negative vds swaps source and drain.
double drain_current(const TransistorInstance& t, double vgs, double vds) noexcept;

/// Net currents (A) flowing into Q and into QB.
std::pair<double, double> node_currents(const CellInstance& cell, StateVector s,
                                        const CellEnvironment& env) noexcept;

/// dV/dt (V/s) at each node.
StateVector derivative(const CellInstance& cell, StateVector s, const CellEnvironment& env) noexcept;

} // namespace sdpuf
