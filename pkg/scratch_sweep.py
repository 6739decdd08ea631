"""Prototype of the backward product-integration sweep; validated against an
ODE oracle before being promoted into the package."""
import numpy as np
from scipy.integrate import solve_ivp
import time

# phi-functions: x purely imaginary
def _phi_series(x, coeffs):
    out = np.zeros_like(x)
    xp = np.ones_like(x)
    for c in coeffs:
        out += c * xp
        xp = xp * x
    return out

import math
def phis(x):
    """Return E(x)=e^x, E1, E2, E3, PA, PB and derivatives PA', PB' (complex x)."""
    x = np.asarray(x, dtype=complex)
    E = np.exp(x)
    small = np.abs(x) < 0.5
    xs = np.where(small, 0.0, x)  # avoid div by ~0 in closed forms
    with np.errstate(divide="ignore", invalid="ignore"):
        E1 = (E - 1.0) / xs
        E2 = (E * (x - 1.0) + 1.0) / xs**2
        E3 = (E * (x*x - 2.0*x + 2.0) - 2.0) / xs**3
        PA = (E - 1.0 - x - 0.5*x*x) / xs**3
        PB = (x*E - E + 1.0 - 0.5*x*x) / xs**3
        dPA = (x*(E - 1.0 - x) - 3.0*(E - 1.0 - x - 0.5*x*x)) / xs**4
        dPB = (x*x*(E - 1.0) - 3.0*(x*E - E + 1.0 - 0.5*x*x)) / xs**4
    N = 14
    c_E1 = [1.0/math.factorial(n+1) for n in range(N)]
    c_E2 = [1.0/(math.factorial(n)*(n+2)) for n in range(N)]
    c_E3 = [1.0/(math.factorial(n)*(n+3)) for n in range(N)]
    c_PA = [1.0/math.factorial(n+3) for n in range(N)]
    c_PB = [(n+2.0)/math.factorial(n+3) for n in range(N)]
    c_dPA = [ (n+1.0)/math.factorial(n+4) for n in range(N)]
    c_dPB = [ (n+1.0)*(n+3.0)/math.factorial(n+4) for n in range(N)]
    xs2 = np.where(small, x, 0.0)
    E1 = np.where(small, _phi_series(xs2, c_E1), E1)
    E2 = np.where(small, _phi_series(xs2, c_E2), E2)
    E3 = np.where(small, _phi_series(xs2, c_E3), E3)
    PA = np.where(small, _phi_series(xs2, c_PA), PA)
    PB = np.where(small, _phi_series(xs2, c_PB), PB)
    dPA = np.where(small, _phi_series(xs2, c_dPA), dPA)
    dPB = np.where(small, _phi_series(xs2, c_dPB), dPB)
    return E, E1, E2, E3, PA, PB, dPA, dPB


def sweep(Vn, r, k, derivatives=False, store=None):
    """Backward sweep; k is an array. Returns dict with rows and origin data."""
    n = len(r)
    k = np.asarray(k, dtype=float)
    nk = len(k)
    z = 2j * k
    dr = np.diff(r)
    uniform = np.allclose(dr, dr[0], rtol=1e-12, atol=0)
    m = np.ones(nk, dtype=complex)
    S = np.zeros(nk, dtype=complex)
    G = np.zeros(nk, dtype=complex)
    D = np.zeros(nk, dtype=complex)
    SD = np.zeros(nk, dtype=complex)
    store = [] if store is None else sorted(store)
    store_set = set(store)
    rows_m = {}
    rows_S = {}
    rows_D = {}
    rows_SD = {}
    if (n-1) in store_set:
        rows_m[n-1] = m.copy(); rows_S[n-1] = S.copy()
        rows_D[n-1] = D.copy(); rows_SD[n-1] = SD.copy()
    sup_m = np.ones(nk)
    sup_m1 = np.zeros(nk)
    sup_dk = np.zeros(nk)
    sup_drdk = np.zeros(nk)
    if uniform:
        d = dr[0]
        x = z * d
        E, E1, E2, E3, PA, PB, dPA, dPB = phis(x)
        M0 = d * E1
        beta = d * E2
        alpha = M0 - beta
        Wa = d*d * PA
        Wb = d*d * PB
        dM0 = 2j * d*d * E2
        dbeta = 2j * d*d * E3
        dalpha = dM0 - dbeta
        dWa = 2j * d**3 * dPA
        dWb = 2j * d**3 * dPB
        dE = 2j * d * E
    for i in range(n - 2, -1, -1):
        if not uniform:
            d = dr[i]
            x = z * d
            E, E1, E2, E3, PA, PB, dPA, dPB = phis(x)
            M0 = d * E1; beta = d * E2; alpha = M0 - beta
            Wa = d*d*PA; Wb = d*d*PB
            dM0 = 2j*d*d*E2; dbeta = 2j*d*d*E3; dalpha = dM0 - dbeta
            dWa = 2j*d**3*dPA; dWb = 2j*d**3*dPB; dE = 2j*d*E
        Vi = Vn[i]; Vi1 = Vn[i+1]
        denom = 1.0 - Vi * Wa
        m_new = (1.0 + G + S * M0 + Vi1 * m * Wb) / denom
        if derivatives:
            Dnum = (D * (1.0 + Vi1 * Wb) + SD * M0 + S * dM0
                    + Vi1 * m * dWb + Vi * m_new * dWa)
            D_new = Dnum / denom
            SD = E * SD + dE * S + Vi * (D_new * alpha + m_new * dalpha) \
                 + Vi1 * (D * beta + m * dbeta)
            D = D_new
        S = E * S + Vi * m_new * alpha + Vi1 * m * beta
        m = m_new
        G = m - 1.0
        am = np.abs(m)
        np.maximum(sup_m, am, out=sup_m)
        np.maximum(sup_m1, np.abs(G), out=sup_m1)
        if derivatives:
            np.maximum(sup_dk, np.abs(D), out=sup_dk)
            np.maximum(sup_drdk, np.abs(SD), out=sup_drdk)
        if i in store_set:
            rows_m[i] = m.copy(); rows_S[i] = S.copy()
            if derivatives:
                rows_D[i] = D.copy(); rows_SD[i] = SD.copy()
    T0 = S - z * G
    return dict(f0=m.copy(), S0=S.copy(), T0=T0, G0=G.copy(),
                D0=D.copy() if derivatives else None,
                rows_m=rows_m, rows_S=rows_S, rows_D=rows_D, rows_SD=rows_SD,
                sup_m=sup_m, sup_m1=sup_m1, sup_dk=sup_dk, sup_drdk=sup_drdk)


if __name__ == "__main__":
    a = 1.0
    V = lambda r: -15.0 * a / (1.0 + a * r * r) ** 2
    rmax, n = 200.0, 8192
    r = np.linspace(0, rmax, n)
    Vn = V(r)

    # --- ODE oracle at several k
    for ktest in (0.1, 1.0, 4.0, 16.0):
        def rhs(t, y):
            return [y[1], (V(t) - ktest**2) * y[0]]
        u0 = [np.exp(1j * ktest * rmax), 1j * ktest * np.exp(1j * ktest * rmax)]
        sol = solve_ivp(rhs, (rmax, 0.0), u0, method="DOP853",
                        rtol=1e-12, atol=1e-13, dense_output=False)
        m_oracle = sol.y[0, -1]  # e^{-ik*0} u(0)
        res = sweep(Vn, r, np.array([ktest]))
        err = abs(res["f0"][0] - m_oracle)
        print(f"k={ktest}: sweep m(0)={res['f0'][0]:.10f} oracle={m_oracle:.10f} err={err:.3e}")

    # --- k=0 column + resonance magnitude
    for rm, nn in ((50.0, 2048), (100.0, 4096), (200.0, 8192)):
        rr = np.linspace(0, rm, nn)
        res0 = sweep(V(rr), rr, np.array([0.0]))
        print(f"rmax={rm}: |f(0,0)| = {abs(res0['f0'][0]):.6e} (tail est {15/(2*(1+rm**2)):.3e})")

    # --- Wronskian defect and convergence order
    ks = np.linspace(0.05, 16, 300)
    for nn in (4096, 8192):
        rr = np.linspace(0, rmax, nn)
        t0 = time.time()
        res = sweep(V(rr), rr, ks)
        dt = time.time() - t0
        f0 = res["f0"]; S0 = res["S0"]
        f0p = 1j * ks * f0 - S0
        defect = np.abs(np.imag(f0 * np.conj(f0p)) + ks)
        print(f"n={nn}: max wronskian defect={defect.max():.3e}  sweep time {dt:.2f}s")

    # --- determinant identity (exact algebra check)
    res = sweep(Vn, r, np.array([0.1, 1.0, 4.0]))
    ksel = np.array([0.1, 1.0, 4.0])
    f0 = res["f0"]; S0 = res["S0"]; T0 = res["T0"]
    f0p = 1j * ksel * f0 - S0
    D_sys = f0 * (np.conj(f0p) + np.conj(T0)) - np.conj(f0) * (f0p + S0)
    D_closed = -2j * ksel * f0
    print("det identity rel err:", np.abs(D_sys - D_closed) / np.abs(D_closed))

    # --- dk sweep vs finite difference
    kc = 0.25
    res = sweep(Vn, r, np.array([kc]), derivatives=True)
    h = 1e-3
    rp = sweep(Vn, r, np.array([kc + h]))
    rmn = sweep(Vn, r, np.array([kc - h]))
    fd = (rp["f0"][0] - rmn["f0"][0]) / (2 * h)
    print(f"dk m(0,{kc}): sweep={res['D0'][0]:.8f} fd={fd:.8f} err={abs(res['D0'][0]-fd):.2e}")

    # dk at k=0 purely imaginary?
    res0 = sweep(Vn, r, np.array([0.0]), derivatives=True)
    print("dk f0(0) =", res0["D0"][0], " (should be ~purely imaginary)")

    # --- timing at full reference k-grid scale
    ks_big = np.linspace(1e-4, 32, 15000)
    t0 = time.time()
    res = sweep(Vn, r, ks_big)
    print(f"full sweep 8192x15000: {time.time()-t0:.1f}s")
    t0 = time.time()
    res = sweep(Vn, r, ks_big[:500], derivatives=True)
    print(f"deriv sweep 8192x500: {time.time()-t0:.1f}s")
