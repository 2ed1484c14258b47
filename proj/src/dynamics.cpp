#include "sdpuf/dynamics.hpp"

#include "sdpuf/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdpuf {

void RampSpec::validate() const
{
    if (!(ramp_time >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "ramp_time must be >= 0");
    if (!(hold_time > 0.0))
        throw Error(ErrorCode::InvalidArgument, "hold_time must be > 0");
}

double RampSpec::vbias_at(double t, double vdd) const noexcept
{
    if (shape == RampShape::Step || ramp_time <= 0.0 || t >= ramp_time)
        return vdd;
    return t <= 0.0 ? 0.0 : vdd * (t / ramp_time);
}

void IntegratorOptions::validate() const
{
    if (!(time_step > 0.0) || !(settle_voltage > 0.0) || !(settle_derivative > 0.0)
        || !(equilibrium_tolerance > 0.0) || !(jacobian_step > 0.0) || max_newton_iterations < 1)
        throw Error(ErrorCode::InvalidArgument, "integrator options must be positive");
}

const char* to_string(StateLabel label) noexcept
{
    switch (label) {
    case StateLabel::S0: return "S0";
    case StateLabel::S1: return "S1";
    case StateLabel::Unsettled: return "UNSETTLED";
    }
    return "UNSETTLED";
}

StateLabel parse_state_label(const std::string& text)
{
    if (text == "S0")
        return StateLabel::S0;
    if (text == "S1")
        return StateLabel::S1;
    if (text == "UNSETTLED")
        return StateLabel::Unsettled;
    throw Error(ErrorCode::Malformed, "unknown state label '" + text + "'");
}

namespace {

StateLabel settled_label(StateVector s, StateVector ds, double vdd, const IntegratorOptions& opts)
{
    if (norm(ds) >= opts.settle_derivative)
        return StateLabel::Unsettled;
    if (norm(s - StateVector{vdd, 0.0}) < opts.settle_voltage)
        return StateLabel::S0;
    if (norm(s - StateVector{0.0, vdd}) < opts.settle_voltage)
        return StateLabel::S1;
    return StateLabel::Unsettled;
}

bool finite(StateVector s) noexcept { return std::isfinite(s.v_q) && std::isfinite(s.v_qb); }

StateVector newton_solve(const CellInstance& cell, const CellEnvironment& env, StateVector seed,
                         const IntegratorOptions& opts)
{
    StateVector s = seed;
    StateVector f = derivative(cell, s, env);
    double fn = norm(f);
    for (int it = 0; it < opts.max_newton_iterations; ++it) {
        const Jacobian2 j = numerical_jacobian(cell, s, env, opts.jacobian_step);
        const double det = j.a * j.d - j.b * j.c;
        if (det == 0.0 || !std::isfinite(det))
            break;
        const StateVector step{-(j.d * f.v_q - j.b * f.v_qb) / det,
                               -(j.a * f.v_qb - j.c * f.v_q) / det};
        double lambda = 1.0;
        StateVector trial = s + lambda * step;
        StateVector ft = derivative(cell, trial, env);
        while (!(norm(ft) < fn) && lambda > 1e-6) {
            lambda *= 0.5;
            trial = s + lambda * step;
            ft = derivative(cell, trial, env);
        }
        const double moved = norm(trial - s);
        if (!(norm(ft) <= fn))
            break;
        s = trial;
        f = ft;
        fn = norm(ft);
        if (fn < 1.0 || moved < 1e-13)
            break;
    }
    if (!(fn < opts.equilibrium_tolerance) || !finite(s))
        throw Error(ErrorCode::NoConvergence, "Newton iteration did not reach an equilibrium");
    return s;
}

// RK4 on the autonomous field at vbias = vdd, in reverse time, with the step
// capped so that each sample moves at most `max_move` volts.
std::vector<StateVector> reverse_branch(const CellInstance& cell, const CellEnvironment& env,
                                        StateVector start, const IntegratorOptions& opts,
                                        double max_move)
{
    const double lo = -0.1;
    const double hi = env.vdd + 0.1;
    auto f = [&](StateVector s) { return -1.0 * derivative(cell, s, env); };
    std::vector<StateVector> pts{start};
    StateVector s = start;
    constexpr std::size_t max_steps = 2'000'000;
    for (std::size_t i = 0; i < max_steps; ++i) {
        const StateVector k1 = f(s);
        const double speed = norm(k1);
        if (!(speed > 0.0))
            break;
        const double h = std::min(opts.time_step, max_move / speed);
        const StateVector k2 = f(s + (0.5 * h) * k1);
        const StateVector k3 = f(s + (0.5 * h) * k2);
        const StateVector k4 = f(s + h * k3);
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!finite(s))
            break;
        pts.push_back(s);
        if (s.v_q < lo || s.v_qb < lo || s.v_q > hi || s.v_qb > hi)
            break;
        // Stalled near a repelling equilibrium of the forward flow.
        if (speed * opts.time_step < 1e-12)
            break;
    }
    return pts;
}

} // namespace

IntegrationResult integrate_from(const CellInstance& cell, const CellEnvironment& env,
                                 StateVector initial, const RampSpec& ramp,
                                 const IntegratorOptions& opts, bool record_trajectory)
{
    if (!finite(initial))
        throw Error(ErrorCode::InvalidArgument, "initial state must be finite");

    IntegrationResult out;
    const double h = opts.time_step;
    const double vdd = env.vdd;
    const auto n_steps = static_cast<std::size_t>(std::ceil(ramp.hold_time / h - 1e-9));
    const double settle_from = ramp.settled_after();
    const std::size_t decimation = std::max<std::size_t>(1, opts.trajectory_decimation);

    auto field = [&](StateVector s, double vbias) {
        return derivative(cell, s, CellEnvironment{vdd, vbias});
    };

    StateVector s = initial;
    if (record_trajectory)
        out.trajectory.push_back(s);
    std::size_t i = 0;
    for (; i < n_steps; ++i) {
        const double t = static_cast<double>(i) * h;
        const double vb0 = ramp.vbias_at(t, vdd);
        const StateVector k1 = field(s, vb0);
        if (t >= settle_from) {
            const StateLabel l = settled_label(s, k1, vdd, opts);
            if (l != StateLabel::Unsettled) {
                out.label = l;
                break;
            }
        }
        const double vbm = ramp.vbias_at(t + 0.5 * h, vdd);
        const StateVector k2 = field(s + (0.5 * h) * k1, vbm);
        const StateVector k3 = field(s + (0.5 * h) * k2, vbm);
        const StateVector k4 = field(s + h * k3, ramp.vbias_at(t + h, vdd));
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!finite(s))
            break;
        if (record_trajectory && (i + 1) % decimation == 0)
            out.trajectory.push_back(s);
    }
    if (i == n_steps && finite(s))
        out.label = settled_label(s, field(s, ramp.vbias_at(static_cast<double>(i) * h, vdd)), vdd, opts);
    out.final_state = s;
    out.steps = i;
    out.elapsed = static_cast<double>(i) * h;
    if (record_trajectory && !(out.trajectory.back() == s))
        out.trajectory.push_back(s);
    return out;
}

StateLabel startup_test0(const CellInstance& cell, const CellEnvironment& env, const RampSpec& ramp,
                         const IntegratorOptions& opts)
{
    return integrate_from(cell, env, {0.0, 0.0}, ramp, opts).label;
}

Jacobian2 numerical_jacobian(const CellInstance& cell, StateVector s, const CellEnvironment& env,
                             double h)
{
    const StateVector fqp = derivative(cell, {s.v_q + h, s.v_qb}, env);
    const StateVector fqm = derivative(cell, {s.v_q - h, s.v_qb}, env);
    const StateVector fbp = derivative(cell, {s.v_q, s.v_qb + h}, env);
    const StateVector fbm = derivative(cell, {s.v_q, s.v_qb - h}, env);
    const double inv = 1.0 / (2.0 * h);
    return {(fqp.v_q - fqm.v_q) * inv, (fbp.v_q - fbm.v_q) * inv,
            (fqp.v_qb - fqm.v_qb) * inv, (fbp.v_qb - fbm.v_qb) * inv};
}

EquilibriumSet find_equilibria(const CellInstance& cell, const CellEnvironment& env,
                               const IntegratorOptions& opts)
{
    const CellEnvironment full = env.at_bias(env.vdd);
    EquilibriumSet eq;
    eq.s0 = newton_solve(cell, full, {env.vdd, 0.0}, opts);
    eq.s1 = newton_solve(cell, full, {0.0, env.vdd}, opts);
    eq.metastable = newton_solve(cell, full, {0.5 * env.vdd, 0.5 * env.vdd}, opts);
    const StateVector m = eq.metastable;
    if (!(eq.s1.v_q < m.v_q && m.v_q < eq.s0.v_q && eq.s0.v_qb < m.v_qb && m.v_qb < eq.s1.v_qb))
        throw Error(ErrorCode::NoConvergence, "metastable point is not between the stable states");
    return eq;
}

std::vector<StateVector> trace_separatrix(const CellInstance& cell, const CellEnvironment& env,
                                          std::size_t n_points, const IntegratorOptions& opts)
{
    const CellEnvironment full = env.at_bias(env.vdd);
    const EquilibriumSet eq = find_equilibria(cell, full, opts);
    const StateVector m = eq.metastable;
    const Jacobian2 j = numerical_jacobian(cell, m, full, opts.jacobian_step);

    const double tr = j.a + j.d;
    const double det = j.a * j.d - j.b * j.c;
    const double disc = 0.25 * tr * tr - det;
    if (!(det < 0.0) || !(disc > 0.0))
        throw Error(ErrorCode::NoConvergence, "metastable point is not a saddle");
    const double lambda_s = 0.5 * tr - std::sqrt(disc);

    StateVector v1{j.b, lambda_s - j.a};
    StateVector v2{lambda_s - j.d, j.c};
    StateVector v = norm(v1) >= norm(v2) ? v1 : v2;
    const double vn = norm(v);
    if (!(vn > 0.0))
        throw Error(ErrorCode::NoConvergence, "degenerate stable eigenvector");
    v = (1.0 / vn) * v;
    // Orient towards increasing voltage so the "minus" branch is the low end.
    if (v.v_q + v.v_qb < 0.0)
        v = -1.0 * v;

    constexpr double eps = 1e-5;
    constexpr double max_move = 5e-4;
    std::vector<StateVector> low = reverse_branch(cell, full, m - eps * v, opts, max_move);
    std::vector<StateVector> high = reverse_branch(cell, full, m + eps * v, opts, max_move);

    std::vector<StateVector> line(low.rbegin(), low.rend());
    line.push_back(m);
    line.insert(line.end(), high.begin(), high.end());

    if (line.size() < n_points && line.size() >= 2) {
        const std::size_t per = (n_points + line.size() - 2) / (line.size() - 1);
        std::vector<StateVector> dense;
        dense.reserve((line.size() - 1) * per + 1);
        for (std::size_t i = 0; i + 1 < line.size(); ++i)
            for (std::size_t k = 0; k < per; ++k) {
                const double w = static_cast<double>(k) / static_cast<double>(per);
                dense.push_back(line[i] + w * (line[i + 1] - line[i]));
            }
        dense.push_back(line.back());
        line = std::move(dense);
    }
    return line;
}

std::optional<double> axis_intercept(const std::vector<StateVector>& polyline, Axis axis)
{
    auto across = [axis](StateVector s) { return axis == Axis::VQ ? s.v_qb : s.v_q; };
    auto along = [axis](StateVector s) { return axis == Axis::VQ ? s.v_q : s.v_qb; };
    std::optional<double> best;
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        const double c0 = across(polyline[i]);
        const double c1 = across(polyline[i + 1]);
        if ((c0 > 0.0 && c1 > 0.0) || (c0 < 0.0 && c1 < 0.0) || c0 == c1)
            continue;
        const double w = c0 / (c0 - c1);
        const double x = along(polyline[i]) + w * (along(polyline[i + 1]) - along(polyline[i]));
        if (x >= 0.0 && (!best || x < *best))
            best = x;
    }
    return best;
}

double distance_to_polyline(const std::vector<StateVector>& polyline, StateVector p)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        const StateVector a = polyline[i];
        const StateVector ab = polyline[i + 1] - a;
        const double len2 = ab.v_q * ab.v_q + ab.v_qb * ab.v_qb;
        double w = 0.0;
        if (len2 > 0.0)
            w = std::clamp(((p.v_q - a.v_q) * ab.v_q + (p.v_qb - a.v_qb) * ab.v_qb) / len2, 0.0, 1.0);
        best = std::min(best, norm(p - (a + w * ab)));
    }
    if (polyline.size() == 1)
        best = norm(p - polyline.front());
    return best;
}

double inverter_output(const TransistorInstance& pull_up, const TransistorInstance& pull_down,
                       double v_in, double vdd)
{
    auto net = [&](double v_out) {
        return -drain_current(pull_up, v_in - vdd, v_out - vdd) - drain_current(pull_down, v_in, v_out);
    };
    double lo = 0.0;
    double hi = vdd;
    if (net(lo) < 0.0 || net(hi) > 0.0)
        throw Error(ErrorCode::NoConvergence, "inverter output not bracketed in [0, vdd]");
    for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (net(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

ButterflySnm butterfly_snm(const CellInstance& cell, const CellEnvironment& env, std::size_t vtc_points)
{
    if (vtc_points < 3)
        throw Error(ErrorCode::InvalidArgument, "need at least 3 VTC points");
    const double vdd = env.vdd;
    const double r2 = std::sqrt(2.0);

    // Rotated coordinates u = (x - y)/sqrt2, w = (x + y)/sqrt2 with x = V_Q, y = V_QB.
    std::vector<double> ua, wa, ub, wb;
    ua.reserve(vtc_points);
    wa.reserve(vtc_points);
    ub.reserve(vtc_points);
    wb.reserve(vtc_points);
    for (std::size_t i = 0; i < vtc_points; ++i) {
        const double t = vdd * static_cast<double>(i) / static_cast<double>(vtc_points - 1);
        const double vq = inverter_output(cell.p1, cell.n1, t, vdd); // curve A: (vq, t)
        const double vqb = inverter_output(cell.p2, cell.n2, t, vdd); // curve B: (t, vqb)
        ua.push_back((vq - t) / r2);
        wa.push_back((vq + t) / r2);
        ub.push_back((t - vqb) / r2);
        wb.push_back((t + vqb) / r2);
    }
    // Curve A has u decreasing in t.
    std::reverse(ua.begin(), ua.end());
    std::reverse(wa.begin(), wa.end());

    auto interp = [](const std::vector<double>& xs, const std::vector<double>& ys, double x) {
        auto it = std::lower_bound(xs.begin(), xs.end(), x);
        if (it == xs.begin())
            return ys.front();
        if (it == xs.end())
            return ys.back();
        const std::size_t k = static_cast<std::size_t>(it - xs.begin());
        const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        return ys[k - 1] + w * (ys[k] - ys[k - 1]);
    };

    const double umax = std::min(std::max(ua.back(), -ua.front()), std::max(ub.back(), -ub.front()));
    const std::size_t n = 4 * vtc_points;
    std::vector<double> diff(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double u = -umax + 2.0 * umax * static_cast<double>(i) / static_cast<double>(n);
        diff[i] = interp(ua, wa, u) - interp(ub, wb, u);
    }
    // The lobes are the two sign regions of the difference; the one reaching
    // the largest u surrounds S0 = (vdd, 0).
    double s0_sign = 0.0;
    for (std::size_t i = n + 1; i-- > 0;)
        if (std::abs(diff[i]) > 1e-9) {
            s0_sign = diff[i] > 0.0 ? 1.0 : -1.0;
            break;
        }
    ButterflySnm out;
    for (double d : diff) {
        if (d * s0_sign > 0.0)
            out.lobe_s0 = std::max(out.lobe_s0, std::abs(d) / r2);
        else
            out.lobe_s1 = std::max(out.lobe_s1, std::abs(d) / r2);
    }
    return out;
}

double hold_snm(const CellInstance& cell, const CellEnvironment& env)
{
    return butterfly_snm(cell, env).snm();
}

} // namespace sdpuf
