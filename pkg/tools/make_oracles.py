"""Regenerate the frozen reference values used by the test-suite.

Everything here is evaluated with mpmath at 50 significant digits and is
independent of the package's own numerics. Run from the repository root:

    python3 tools/make_oracles.py > tests/oracle_values.py
"""

import mpmath as mp

mp.mp.dps = 50

E1, C1, A1 = mp.mpf("69e9"), mp.mpf(6320), mp.mpf(0)
EA, CA = mp.mpf("3.5e9"), mp.mpf(2500)
TYPICAL = [mp.mpf("14.85"), mp.mpf("8.05e3"), mp.mpf("9.62e-6"), mp.mpf("-42.19"), mp.mpf("9.53e-5")]


def reflection(theta, omega):
    log_k0, alpha0, _, _, l_bl = theta
    k = mp.power(10, log_k0)
    k1 = omega / C1 + 1j * A1
    ka = omega / CA + 1j * alpha0
    g1, ga = E1 * k1, EA * ka
    c_n = g1 ** 2 / k
    c_d = 2 * g1 * ga * (1 + g1 / k)
    s_n = g1 ** 2 - ga ** 2 + ga ** 2 * g1 ** 2 / k ** 2
    s_d = g1 ** 2 + ga ** 2 + 2 * ga ** 2 * g1 / k + ga ** 2 * g1 ** 2 / k ** 2
    c, s = mp.cos(ka * l_bl), mp.sin(ka * l_bl)
    return (c_n * c + 1j * s_n * s) / (c_d * c + 1j * s_d * s)


def phase_curve(theta, hz):
    out, prev = [], None
    for f in hz:
        w = 2 * mp.pi * f
        p = mp.degrees(mp.arg(reflection(theta, w)))
        if prev is not None:
            p -= 360 * mp.nint((p - prev) / 360)
        prev = p
        out.append(p + theta[2] * w + theta[3])
    return out


def _bisect(f, lo, hi, steps=400):
    # f increasing on [lo, hi] with a sign change
    for _ in range(steps):
        mid = (lo + hi) / 2
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def chi2_upper(dof, p):
    k = mp.mpf(dof) / 2
    # search over t = log x
    g = lambda t: p - mp.gammainc(k, mp.exp(t) / 2, mp.inf, regularized=True)  # noqa: E731
    return mp.exp(_bisect(g, mp.mpf(-200), mp.mpf(20)))


def beta_upper_w(a, b, p):
    # w with I_w(a, b) = p, searched over t = logit(w)
    g = lambda t: mp.betainc(a, b, 0, 1 / (1 + mp.exp(-t)), regularized=True) - p  # noqa: E731
    t = _bisect(g, mp.mpf(-300), mp.mpf(300))
    return 1 / (1 + mp.exp(-t))


def f_upper(d1, d2, p):
    w = beta_upper_w(mp.mpf(d2) / 2, mp.mpf(d1) / 2, p)
    return d2 * (1 - w) / (d1 * w)


def t_upper(dof, p):
    w = beta_upper_w(mp.mpf(dof) / 2, mp.mpf(1) / 2, 2 * p)
    return mp.sqrt(dof * (1 - w) / w)


def cp(k, n, conf):
    tail = (1 - mp.mpf(conf)) / 2
    lo = 0 if k == 0 else beta_upper_w(k, n - k + 1, tail)
    hi = 1 if k == n else beta_upper_w(k + 1, n - k, 1 - tail)
    return lo, hi


CHI2 = [(1, "0.05"), (2, "0.5"), (5, "0.01"), (10, "0.9"), (30, "0.05"), (100, "0.05"),
        (95, "0.001"), (3, "1e-6"), (50, "0.99"), (7, "0.3")]
F = [(5, 95, "0.05"), (2, 58, "0.01"), (1, 1, "0.1"), (3, 7, "0.5"), (10, 20, "0.95"),
     (2, 8, "0.001"), (5, 1000, "0.05"), (1, 95, "0.04"), (20, 3, "0.2"), (2, 198, "0.005")]
T = [(1, "0.25"), (95, "0.025"), (2, "0.01"), (5, "0.1"), (10, "0.4"), (30, "0.005"),
     (95, "0.0202"), (200, "0.05"), (3, "1e-5"), (58, "0.3")]
CP = [(1900, 2000, "0.95"), (0, 20, "0.95"), (7, 50, "0.95"), (480, 500, "0.95"), (13, 13, "0.99")]


def main():
    print('"""Reference values frozen from tools/make_oracles.py (mpmath, 50 digits)."""')
    print()
    omega = 2 * mp.pi * mp.mpf("4e6")
    r = reflection(TYPICAL, omega)
    print(f"R_TYPICAL_4MHZ = complex({mp.nstr(r.real, 20)}, {mp.nstr(r.imag, 20)})")
    hz = [mp.mpf("3.25e6") + (mp.mpf("13e6") - mp.mpf("3.25e6")) * i / 99 for i in range(100)]
    curve = phase_curve(TYPICAL, hz)
    print("PHASE_TYPICAL_DEFAULT_GRID = [")
    for i in range(0, 100, 4):
        print("    " + ", ".join(mp.nstr(v, 18) for v in curve[i:i + 4]) + ",")
    print("]")
    print("CHI2_UPPER = [")
    for d, p in CHI2:
        print(f"    ({d}, {p}, {mp.nstr(chi2_upper(d, mp.mpf(p)), 20)}),")
    print("]")
    print("F_UPPER = [")
    for d1, d2, p in F:
        print(f"    ({d1}, {d2}, {p}, {mp.nstr(f_upper(d1, d2, mp.mpf(p)), 20)}),")
    print("]")
    print("T_UPPER = [")
    for d, p in T:
        print(f"    ({d}, {p}, {mp.nstr(t_upper(d, mp.mpf(p)), 20)}),")
    print("]")
    print("CLOPPER_PEARSON = [")
    for k, n, c in CP:
        lo, hi = cp(k, n, c)
        print(f"    ({k}, {n}, {c}, {mp.nstr(mp.mpf(lo), 20)}, {mp.nstr(mp.mpf(hi), 20)}),")
    print("]")


if __name__ == "__main__":
    main()
