"""High-precision reference values for the device and equilibrium tests.

Re-implements the transistor equations with mpmath at 40 digits, independent
of the C++ code, and prints the values frozen in tests/test_device.cpp and
tests/test_dynamics.cpp.
"""
from mpmath import mp, mpf, exp, log, expm1, findroot

mp.dps = 40
VT = mpf("0.025852")

NMOS = dict(vth=mpf("0.4"), kp=mpf("300e-6"), wl=mpf(1), lam=mpf("0.1"), n=mpf("1.3"), i0=mpf("1e-7"))
PMOS = dict(vth=mpf("-0.4"), kp=mpf("120e-6"), wl=mpf(1), lam=mpf("0.1"), n=mpf("1.3"), i0=mpf("4e-8"))
C = mpf("1e-15")


def softplus(x):
    return log(1 + exp(x))


def channel(p, vth, vgs, vds):
    if vds <= 0:
        return mpf(0)
    nvt = p["n"] * VT
    vov = vgs - vth
    sf = 2 * nvt * softplus(vov / (2 * nvt))
    sr = 2 * nvt * softplus((vov - vds) / (2 * nvt))
    strong = p["kp"] * p["wl"] / 2 * (sf ** 2 - sr ** 2)
    weak = p["i0"] * p["wl"] * exp(vov / nvt) * (-expm1(-vds / VT))
    return strong * weak / (strong + weak) * (1 + p["lam"] * vds)


def drain(p, vgs, vds, offset=mpf(0)):
    vth = p["vth"] + offset
    sign = 1
    if p is PMOS:
        sign, vgs, vds, vth = -1, -vgs, -vds, -vth
    if vds < 0:
        return -sign * channel(p, vth, vgs - vds, -vds)
    return sign * channel(p, vth, vgs, vds)


def deriv(vq, vqb, vdd=mpf("1.2")):
    iq = -drain(PMOS, vqb - vdd, vq - vdd) - drain(NMOS, vqb, vq)
    iqb = -drain(PMOS, vq - vdd, vqb - vdd) - drain(NMOS, vq, vqb)
    return iq / C, iqb / C


def main():
    cases = [
        ("n on", NMOS, "1.2", "0.6"),
        ("n weak", NMOS, "0.2", "0.05"),
        ("n off", NMOS, "0", "1.2"),
        ("n reverse", NMOS, "0.8", "-0.2"),
        ("p on", PMOS, "-1.2", "-0.3"),
        ("p reverse", PMOS, "-0.7", "0.25"),
    ]
    for name, p, vgs, vds in cases:
        print(f"{name:10s} vgs={vgs:5s} vds={vds:5s} I = {mp.nstr(drain(p, mpf(vgs), mpf(vds)), 17)}")
    for vq, vqb in [("0.3", "0.5"), ("0.9", "0.1")]:
        d = deriv(mpf(vq), mpf(vqb))
        print(f"dV/dt at ({vq}, {vqb}) = ({mp.nstr(d[0], 17)}, {mp.nstr(d[1], 17)})")
    m = findroot(lambda x: deriv(x, x)[0], mpf("0.56"))
    print("metastable point v =", mp.nstr(m, 17))
    s0 = findroot(lambda a, b: deriv(a, b), (mpf("1.2"), mpf("1e-9")))
    print("S0 =", mp.nstr(s0[0], 17), mp.nstr(s0[1], 17))


if __name__ == "__main__":
    main()
