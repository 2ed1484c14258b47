#pragma once

#include <cmath>

namespace sdpuf {

/// A point (V_Q, V_QB) of the cell's state space, in volts.
struct StateVector {
    double v_q = 0.0;
    double v_qb = 0.0;

    constexpr StateVector swapped() const noexcept { return {v_qb, v_q}; }

    friend constexpr StateVector operator+(StateVector a, StateVector b) noexcept
    {
        return {a.v_q + b.v_q, a.v_qb + b.v_qb};
    }
    friend constexpr StateVector operator-(StateVector a, StateVector b) noexcept
    {
        return {a.v_q - b.v_q, a.v_qb - b.v_qb};
    }
    friend constexpr StateVector operator*(double s, StateVector a) noexcept
    {
        return {s * a.v_q, s * a.v_qb};
    }
    friend constexpr bool operator==(StateVector, StateVector) = default;
};

inline double norm(StateVector s) noexcept { return std::hypot(s.v_q, s.v_qb); }

} // namespace sdpuf
