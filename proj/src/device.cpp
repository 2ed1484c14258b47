#include "sdpuf/device.hpp"

#include "sdpuf/error.hpp"

#include <algorithm>
#include <cmath>

namespace sdpuf {

namespace {

inline double softplus(double x) noexcept
{
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// n-channel-oriented current for vds >= 0.
inline double channel_current(const MosParams& p, double vth, double vgs, double vds) noexcept
{
    if (!(vds > 0.0))
        return 0.0;
    const double wl = p.width / p.length;
    const double nvt = p.subthreshold_slope_factor * kThermalVoltage;
    const double two_nvt = 2.0 * nvt;
    const double vov = vgs - vth;

    const double sf = two_nvt * softplus(vov / two_nvt);
    const double sr = two_nvt * softplus((vov - vds) / two_nvt);
    const double strong = 0.5 * p.transconductance_factor * wl * (sf - sr) * (sf + sr);

    const double weak = p.off_leakage_scale * wl * std::exp(std::min(vov / nvt, 700.0))
        * -std::expm1(-vds / kThermalVoltage);

    const double sum = strong + weak;
    if (!(sum > 0.0))
        return 0.0;
    return strong * weak / sum * (1.0 + p.channel_length_modulation * vds);
}

inline double into_node(const TransistorInstance& pull_up, const TransistorInstance& pull_down,
                        double v_node, double v_gate, double vbias) noexcept
{
    const double i_up = drain_current(pull_up, v_gate - vbias, v_node - vbias);
    const double i_down = drain_current(pull_down, v_gate, v_node);
    return -i_up - i_down;
}

void require(bool ok, const char* what)
{
    if (!ok)
        throw Error(ErrorCode::InvalidArgument, what);
}

} // namespace

void MosParams::validate() const
{
    require(std::isfinite(vth_nominal), "vth_nominal must be finite");
    require(width > 0.0, "width must be > 0");
    require(length > 0.0, "length must be > 0");
    require(transconductance_factor > 0.0, "transconductance_factor must be > 0");
    require(subthreshold_slope_factor >= 1.0, "subthreshold_slope_factor must be >= 1");
    require(channel_length_modulation >= 0.0, "channel_length_modulation must be >= 0");
    require(off_leakage_scale > 0.0, "off_leakage_scale must be > 0");
}

MosParams MosParams::default_nmos()
{
    return MosParams{};
}

MosParams MosParams::default_pmos()
{
    MosParams p;
    p.polarity = Polarity::PChannel;
    p.vth_nominal = -0.4;
    p.transconductance_factor = 120e-6;
    p.off_leakage_scale = 4e-8;
    return p;
}

void CellInstance::validate() const
{
    for (const auto* t : {&n1, &n2, &p1, &p2, &nx1, &nx2}) {
        t->params.validate();
        require(std::isfinite(t->vth()), "effective threshold must be finite");
    }
    require(node_capacitance_q > 0.0 && node_capacitance_qb > 0.0, "node capacitances must be > 0");
}

CellInstance CellInstance::mirrored() const
{
    CellInstance m = *this;
    std::swap(m.n1, m.n2);
    std::swap(m.p1, m.p2);
    std::swap(m.nx1, m.nx2);
    std::swap(m.node_capacitance_q, m.node_capacitance_qb);
    return m;
}

void CellEnvironment::validate() const
{
    require(vdd > 0.0, "vdd must be > 0");
    require(vbias >= 0.0 && vbias <= vdd, "vbias must lie in [0, vdd]");
}

CellInstance DeviceConfig::nominal_cell() const
{
    CellInstance c;
    c.n1.params = c.n2.params = c.nx1.params = c.nx2.params = nmos;
    c.p1.params = c.p2.params = pmos;
    c.node_capacitance_q = c.node_capacitance_qb = node_capacitance;
    return c;
}

void DeviceConfig::validate() const
{
    nmos.validate();
    pmos.validate();
    require(nmos.polarity == Polarity::NChannel, "nmos entry must be n-channel");
    require(pmos.polarity == Polarity::PChannel, "pmos entry must be p-channel");
    require(node_capacitance > 0.0, "node_capacitance must be > 0");
    require(vdd > 0.0, "vdd must be > 0");
}

double drain_current(const TransistorInstance& t, double vgs, double vds) noexcept
{
    double vth = t.vth();
    double sign = 1.0;
    if (t.params.polarity == Polarity::PChannel) {
        sign = -1.0;
        vgs = -vgs;
        vds = -vds;
        vth = -vth;
    }
    if (vds < 0.0)
        return -sign * channel_current(t.params, vth, vgs - vds, -vds);
    return sign * channel_current(t.params, vth, vgs, vds);
}

std::pair<double, double> node_currents(const CellInstance& cell, StateVector s,
                                        const CellEnvironment& env) noexcept
{
    return {into_node(cell.p1, cell.n1, s.v_q, s.v_qb, env.vbias),
            into_node(cell.p2, cell.n2, s.v_qb, s.v_q, env.vbias)};
}

StateVector derivative(const CellInstance& cell, StateVector s, const CellEnvironment& env) noexcept
{
    const auto [iq, iqb] = node_currents(cell, s, env);
    return {iq / cell.node_capacitance_q, iqb / cell.node_capacitance_qb};
}

} // namespace sdpuf
