#include "sdpuf/separatrix.hpp"

#include "sdpuf/error.hpp"

#include <cmath>

namespace sdpuf {

namespace {

bool flips(const CellInstance& cell, const CellEnvironment& env, StateLabel bias, double v,
           const RampSpec& ramp, const IntegratorOptions& opts)
{
    return integrate_from(cell, env, flip_axis_point(bias, v), ramp, opts).label == opposite(bias);
}

void check_bias(StateLabel bias)
{
    if (bias == StateLabel::Unsettled)
        throw Error(ErrorCode::InvalidArgument, "flip search needs a settled bias");
}

} // namespace

StateVector flip_axis_point(StateLabel bias, double v)
{
    check_bias(bias);
    return bias == StateLabel::S1 ? StateVector{v, 0.0} : StateVector{0.0, v};
}

FlipSearchResult flip_search(const CellInstance& cell, const CellEnvironment& env, StateLabel bias,
                             const RampSpec& ramp, const IntegratorOptions& opts, double tolerance)
{
    check_bias(bias);
    if (!(tolerance > 0.0))
        throw Error(ErrorCode::InvalidArgument, "bisection tolerance must be > 0");

    FlipSearchResult r;
    double lo = 0.0;
    double hi = env.vdd;
    r.iterations = 1;
    if (!flips(cell, env, bias, hi, ramp, opts)) {
        r.flip_voltage = env.vdd;
        r.kept_voltage = env.vdd;
        r.converged = false;
        return r;
    }
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        ++r.iterations;
        if (flips(cell, env, bias, mid, ramp, opts))
            hi = mid;
        else
            lo = mid;
    }
    r.flip_voltage = hi;
    r.kept_voltage = lo;
    r.converged = true;
    return r;
}

SdRecord compute_sd(const CellInstance& cell, const CellEnvironment& env, const RampSpec& ramp,
                    const IntegratorOptions& opts, double tolerance)
{
    SdRecord rec;
    rec.cell_id = cell.cell_id;
    rec.bias = startup_test0(cell, env, ramp, opts);
    if (rec.bias == StateLabel::Unsettled) {
        rec.sd = 0.0;
        rec.flip_voltage = 0.0;
        rec.converged = true;
        return rec;
    }
    const FlipSearchResult f = flip_search(cell, env, rec.bias, ramp, opts, tolerance);
    rec.flip_voltage = f.flip_voltage;
    rec.iterations = f.iterations;
    rec.converged = f.converged;
    rec.sd = rec.bias == StateLabel::S1 ? f.flip_voltage : -f.flip_voltage;
    return rec;
}

double sd_oracle(const CellInstance& cell, const CellEnvironment& env, const RampSpec& ramp,
                 double grid_step, const IntegratorOptions& opts)
{
    if (!(grid_step > 0.0))
        throw Error(ErrorCode::InvalidArgument, "grid_step must be > 0");
    const StateLabel bias = startup_test0(cell, env, ramp, opts);
    if (bias == StateLabel::Unsettled)
        return 0.0;
    const double sign = bias == StateLabel::S1 ? 1.0 : -1.0;
    const auto n = static_cast<long>(std::floor(env.vdd / grid_step + 1e-9));
    for (long k = 1; k <= n; ++k) {
        const double v = static_cast<double>(k) * grid_step;
        if (flips(cell, env, bias, v, ramp, opts))
            return sign * v;
    }
    throw Error(ErrorCode::NoFlip, "no axis point up to vdd flips the cell");
}

} // namespace sdpuf
