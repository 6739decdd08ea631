"""Spectral multipliers, their kernels, and the kernel-bound experiments.

A multiplier mu(sqrt(H)) acts through the distorted transform; its kernel on
the half line is K(r,r') = (2/pi) int mu(k) e~(r,k) conj(e~(r',k)) dk (the
2/pi is kept inside so K is literally the kernel of the operator on
L2(0,inf)).  Writing f(r,k) = e^{irk} m(r,k) splits K into four pieces with
phases e^{+-i(r-r')k} and e^{+-i(r+r')k}; the high- and low-energy
decompositions regroup those pieces into an explicit singular part K1, a
Calderon-Zygmund remainder K2, and the (r+r')^-1 tail K3.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grids import BumpFunction, RadialGrid, SpectralGrid, composite_cubic_weights
from .jost import BoundStateSet, JostTable, ScatteringData
from .spectral import Eigenbasis, forward_transform, inverse_transform, project_continuous, scattering_coeffs

__all__ = [
    "MultiplierSpec",
    "KernelMatrix",
    "KernelDecomposition",
    "mu_constant",
    "mikhlin_high_pass",
    "mikhlin_low_pass",
    "smooth_indicator",
    "lp_block_multiplier",
    "random_sign_multiplier",
    "check_mikhlin",
    "apply_multiplier",
    "assemble_kernel",
    "decompose_kernel",
    "verify_high_energy_bounds",
    "verify_low_energy_bounds",
    "hormander_scan",
]


# ---------------------------------------------------------------------------
# multiplier symbols
# ---------------------------------------------------------------------------

@dataclass
class MultiplierSpec:
    """A symbol mu(k) with up to three derivatives and declared support.

    support is one of "high" (mu = 0 on k < 1), "low" (mu = 0 on k > 1) or
    "full".  k_lo/k_hi bracket where mu is nonzero (np.inf allowed); they
    drive kernel-grid density choices.  Derivatives fall back to high-order
    differencing when closed forms are not supplied.
    """

    mu: Callable[[np.ndarray], np.ndarray]
    support: str = "full"
    derivs: tuple[Callable, ...] = ()
    k_lo: float = 0.0
    k_hi: float = np.inf
    label: str = "mu"

    def __call__(self, k, ell: int = 0):
        k = np.asarray(k, dtype=float)
        if ell == 0:
            return np.asarray(self.mu(k), dtype=float)
        if ell <= len(self.derivs):
            return np.asarray(self.derivs[ell - 1](k), dtype=float)
        return self._fd(k, ell)

    def _fd(self, k, ell):
        # 4th-order central differences with a k-proportional step
        h = 1e-2 * np.maximum(k, 1e-6)
        stencils = {
            1: ([-2, -1, 1, 2], [1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12], 1),
            2: ([-2, -1, 0, 1, 2], [-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12], 2),
            3: ([-3, -2, -1, 1, 2, 3],
                [1.0 / 8, -1.0, 13.0 / 8, -13.0 / 8, 1.0, -1.0 / 8], 3),
        }
        offs, wts, p = stencils[ell]
        out = np.zeros_like(k)
        for o, w in zip(offs, wts):
            out += w * np.asarray(self.mu(k + o * h), dtype=float)
        return out / h**p

    def verify_support(self, kgrid: SpectralGrid, tol: float = 1e-12) -> bool:
        k = kgrid.nodes
        if self.support == "high":
            mask = k < 1.0
        elif self.support == "low":
            mask = k > 1.0
        else:
            return True
        return bool(np.all(np.abs(self(k[mask])) <= tol))


def mu_constant(c: float = 1.0) -> MultiplierSpec:
    return MultiplierSpec(mu=lambda k: np.full_like(np.asarray(k, float), c),
                          support="full", derivs=(
                              lambda k: np.zeros_like(np.asarray(k, float)),
                              lambda k: np.zeros_like(np.asarray(k, float)),
                              lambda k: np.zeros_like(np.asarray(k, float))),
                          label=f"const({c:g})")


def mikhlin_high_pass(bump: BumpFunction) -> MultiplierSpec:
    """mu = 1 - chi(k): vanishes below k = 1, identically 1 above k = 2."""
    return MultiplierSpec(
        mu=lambda k: 1.0 - bump.chi(k),
        derivs=tuple((lambda ell: (lambda k: -bump.chi(k, ell)))(e) for e in (1, 2, 3)),
        support="high", k_lo=1.0, k_hi=np.inf, label="high_pass",
    )


def mikhlin_low_pass(bump: BumpFunction) -> MultiplierSpec:
    """mu = chi(2k): identically 1 below k = 1/2, vanishes above k = 1."""
    return MultiplierSpec(
        mu=lambda k: bump.chi(2.0 * np.asarray(k, float)),
        derivs=tuple((lambda ell: (lambda k: 2.0**ell * bump.chi(2.0 * np.asarray(k, float), ell)))(e)
                     for e in (1, 2, 3)),
        support="low", k_lo=0.0, k_hi=1.0, label="low_pass",
    )


def smooth_indicator(bump: BumpFunction, lo: float, hi: float,
                     ramp: float = 0.25) -> MultiplierSpec:
    """Smoothed indicator of [lo, hi] with eta-ramps of relative width ramp."""
    wl = ramp * lo
    wh = ramp * hi

    def ramp_up(k, ell=0):
        from .grids import _eta_derivs
        return _eta_derivs((np.asarray(k, float) - lo) / wl, bump.sharpness, ell) / wl**ell

    def ramp_dn(k, ell=0):
        from .grids import _eta_derivs
        return _eta_derivs((np.asarray(k, float) - hi + wh) / wh, bump.sharpness, ell) / wh**ell

    def mu(k, ell=0):
        if ell == 0:
            return ramp_up(k) * (1.0 - ramp_dn(k))
        # Leibniz on the product
        from math import comb
        tot = np.zeros_like(np.asarray(k, float))
        for a in range(ell + 1):
            left = ramp_up(k, a)
            right = (1.0 - ramp_dn(k)) if a == ell else -ramp_dn(k, ell - a)
            tot += comb(ell, a) * left * right
        return tot

    return MultiplierSpec(
        mu=lambda k: mu(k), derivs=tuple((lambda e: (lambda k: mu(k, e)))(e) for e in (1, 2, 3)),
        support="full", k_lo=lo - wl, k_hi=hi + wh,
        label=f"indicator[{lo:g},{hi:g}]",
    )


def lp_block_multiplier(bump: BumpFunction, j: int, j_min: int, j_max: int) -> MultiplierSpec:
    """One Littlewood-Paley block Phi_j (cumulative at the range boundaries)."""
    return MultiplierSpec(
        mu=lambda k: bump.block(j, j_min, j_max, k),
        derivs=tuple((lambda e: (lambda k: bump.block(j, j_min, j_max, k, e)))(e)
                     for e in (1, 2, 3)),
        support="full",
        k_lo=0.0 if j == j_min else 2.0 ** (j - 1),
        k_hi=np.inf if j == j_max else 2.0 ** (j + 1),
        label=f"block[{j}]",
    )


def random_sign_multiplier(bump: BumpFunction, signs: np.ndarray,
                           j_min: int, j_max: int) -> MultiplierSpec:
    """Random-sign Littlewood-Paley symbol sum_j s_j Phi_j, |mu| <= 1."""
    signs = np.asarray(signs, dtype=float)
    if len(signs) != j_max - j_min + 1:
        raise ValueError("need one sign per retained block")

    def make(ell):
        def f(k):
            tot = np.zeros_like(np.asarray(k, float))
            for s, j in zip(signs, range(j_min, j_max + 1)):
                tot += s * bump.block(j, j_min, j_max, k, ell)
            return tot
        return f

    return MultiplierSpec(mu=make(0), derivs=(make(1), make(2), make(3)),
                          support="full",
                          label="signs[" + "".join("+" if s > 0 else "-" for s in signs) + "]")


def check_mikhlin(mu: MultiplierSpec, kgrid: SpectralGrid,
                  declared_bound: float | None = None) -> dict:
    """Mikhlin seminorms sup_k k^ell |mu^(ell)(k)| for ell = 0..3.

    Sampling is a canonical geometric pattern per dyadic block, so the
    seminorms of dilated symbols mu(2^-j k) agree across j to roundoff.
    """
    pattern = np.geomspace(0.5, 2.0, 257)
    sups = np.zeros(4)
    for j in range(kgrid.j_min - 1, kgrid.j_max + 2):
        k = 2.0**j * pattern
        k = k[(k >= kgrid.k_floor) & (k <= kgrid.k_max * 2.0)]
        if not len(k):
            continue
        for ell in range(4):
            vals = np.abs(mu(k, ell)) * k**ell
            sups[ell] = max(sups[ell], float(vals.max()))
    finite = bool(np.all(np.isfinite(sups)))
    ok = finite and (declared_bound is None or bool(np.all(sups <= declared_bound)))
    return {
        "constants": sups.tolist(),
        "support_ok": mu.verify_support(kgrid),
        "pass": ok and mu.verify_support(kgrid),
    }


# ---------------------------------------------------------------------------
# applying a multiplier
# ---------------------------------------------------------------------------

def apply_multiplier(E: Eigenbasis, B: BoundStateSet | None,
                     mu: MultiplierSpec | np.ndarray, f: np.ndarray) -> np.ndarray:
    """inverse_transform(mu . forward_transform(P_c f)), as one real matvec.

    mu may be a MultiplierSpec or precomputed symbol values on the spectral
    nodes.  Complex inputs are handled by linearity.
    """
    mu_vals = mu(E.kgrid.nodes) if isinstance(mu, MultiplierSpec) else np.asarray(mu)
    f = np.asarray(f)
    fmax = np.abs(f).max() if f.size else 0.0
    if fmax > 0 and np.abs(f[-1]) > 1e-8 * fmax:
        warnings.warn("input is not negligible at r_max; multiplier output is truncated",
                      stacklevel=2)
    fc = project_continuous(B, f)
    if np.iscomplexobj(fc):
        return (E.multiplier_matvec(mu_vals, fc.real)
                + 1j * E.multiplier_matvec(mu_vals, fc.imag))
    return E.multiplier_matvec(mu_vals, fc)


# ---------------------------------------------------------------------------
# dense kernels
# ---------------------------------------------------------------------------

@dataclass
class KernelMatrix:
    """Dense kernel K(r,r') on a strided sub-grid with its own quadrature."""

    nodes: np.ndarray
    weights: np.ndarray
    indices: np.ndarray
    K: np.ndarray

    def matvec(self, f_sub: np.ndarray) -> np.ndarray:
        return self.K @ (self.weights * f_sub)


def assemble_kernel(E: Eigenbasis, mu: MultiplierSpec | np.ndarray,
                    stride: int | None = None, max_nodes: int = 2048) -> KernelMatrix:
    """K(r,r') = (2/pi) int mu(k) e~(r,k) conj(e~(r',k)) dk on a sub-grid.

    The sub-grid stride is chosen from the multiplier's top frequency so the
    matvec quadrature resolves the kernel's oscillation; an explicit memory
    guard rejects oversized grids.
    """
    if isinstance(mu, MultiplierSpec):
        mu_vals = mu(E.kgrid.nodes)
        k_hi = min(mu.k_hi, E.kgrid.k_max)
    else:
        mu_vals = np.asarray(mu)
        k_hi = E.kgrid.k_max
    h = E.rgrid.mesh
    if stride is None:
        stride = max(1, int(np.pi / (4.0 * k_hi) / h))
    idx = np.arange(0, E.rgrid.n, stride)
    if idx[-1] != E.rgrid.n - 1:
        idx = np.append(idx, E.rgrid.n - 1)
    if len(idx) > max_nodes:
        raise ValueError(
            f"kernel grid of {len(idx)} nodes exceeds the {max_nodes}-node guard; "
            "increase stride or loosen max_nodes")
    nodes = E.rgrid.nodes[idx]
    U = E.u[idx]
    K = (U * E.multiplier_weights(mu_vals)[None, :]) @ U.T
    return KernelMatrix(nodes=nodes, weights=composite_cubic_weights(nodes),
                        indices=idx, K=K)


# ---------------------------------------------------------------------------
# four-piece decomposition and the two lemma regroupings
# ---------------------------------------------------------------------------

@dataclass
class KernelDecomposition:
    """K and its pieces on (rows x rows) of the Jost table's sub-grid.

    Kpp/Kmm carry the e^{+-i(r-r')k} phases, Kpm/Kmp the e^{+-i(r+r')k}
    ones.  K1/K2/K3 follow the active lemma's regrouping; in the resonant
    low-energy case K1 is identically zero (the zero-energy freeze vanishes
    with f(0,0)) and its would-be literal value is folded into K2.
    per_block maps j -> (K_j, dr_K_j) for the retained dyadic blocks.
    """

    support: str
    r_nodes: np.ndarray
    K: np.ndarray
    Kpp: np.ndarray
    Kmm: np.ndarray
    Kpm: np.ndarray
    Kmp: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    K3: np.ndarray
    dK2_dr: np.ndarray | None = None
    per_block: dict = field(default_factory=dict)
    resonant: bool = False
    k1_literal_norm: float = 0.0
    mesh_sub: float = 0.0

    def piece_sum_defect(self) -> float:
        total = self.Kpp + self.Kmm + self.Kpm + self.Kmp
        scale = np.abs(self.K).max()
        return float(np.abs(total - self.K).max() / scale) if scale > 0 else 0.0

    def grouping_defect(self) -> float:
        total = self.K1 + self.K2 + self.K3
        scale = np.abs(self.K).max()
        return float(np.abs(total - self.K).max() / scale) if scale > 0 else 0.0


def decompose_kernel(J: JostTable, S: ScatteringData, mu: MultiplierSpec,
                     resonance_eps: float = 1e-3,
                     bump: BumpFunction | None = None) -> KernelDecomposition:
    """Assemble the four phase pieces and the active lemma's K1/K2/K3.

    support = "high": K1 = (2/pi)(1/2) int cos((r-r')k) mu dk,
    K2 = (Kpp + Kmm) - K1, K3 = Kpm + Kmp.
    support = "low": K1 freezes m at k = 0 (and vanishes identically in the
    resonant case); K2 is the j-summed remainder, with per-block kernels
    K_j built from m(r,r';k) = m(r,k) conj(m(r',k)) - m(r,0) m(r',0) for
    j_min <= j <= 0; K3 = Kpm + Kmp.
    The cosine integrals use the same spectral-grid panels as every other
    k-integral, so their discretization error cancels inside K2.
    """
    if mu.support not in ("high", "low"):
        raise ValueError("kernel decompositions are per-lemma: support must be "
                         "'high' or 'low', not %r" % (mu.support,))
    kg = J.kgrid
    k = kg.nodes
    mu_vals = mu(k)
    act = np.nonzero(np.abs(mu_vals) > 0)[0]
    if len(act) == 0:
        raise ValueError("multiplier vanishes on the whole spectral grid")
    k = k[act]
    w = kg.weights[act]
    mu_vals = mu_vals[act]
    r = J.r_nodes
    m = J.m[:, act]
    f0 = S.f0[act]
    c_plus_full, _ = scattering_coeffs(S)
    c_plus = c_plus_full[act]
    phase = np.exp(1j * np.outer(r, k))
    A = phase * m                      # f(r,k) rows
    # |f0|^2-normalized spectral weight: e~ e~'* = u u' / |f0|^2 etc.
    base = (2.0 / np.pi) * w / np.abs(f0) ** 2
    # pieces: e~(r) conj(e~(r')) = |c+|^2 f f'* + |c-|^2 f* f' + ...
    # built directly from f-rows; |c+|^2 = |c-|^2 = 1/4.
    Kpp = 0.25 * (A * ((2.0 / np.pi) * w * mu_vals)[None, :]) @ np.conj(A.T)
    Kmm = np.conj(Kpp)
    cp_w = (2.0 / np.pi) * w * mu_vals * c_plus / (2j)
    Kpm = (A * cp_w[None, :]) @ A.T
    Kmp = np.conj(Kpm)
    # direct kernel via the u-route for the piece-sum consistency check
    u = np.imag(A * np.conj(f0)[None, :])
    K = (u * (base * mu_vals)[None, :]) @ u.T
    K3 = 2.0 * np.real(Kpm)

    resonant = S.resonance_magnitude < resonance_eps
    m0 = J.m_zero
    cos_w = (2.0 / np.pi) * w * mu_vals
    C = (phase * cos_w[None, :]) @ np.conj(phase.T)   # sum w mu e^{i(r-r')k}
    k1_literal = 0.5 * np.outer(m0, m0) * np.real(C)
    if mu.support == "high":
        K1 = 0.5 * np.real(C)
        K2 = 2.0 * np.real(Kpp) - K1
        dK2 = None
        per_block = {}
        k1_norm = float(np.abs(K1).max())
    else:
        if resonant:
            K1 = np.zeros_like(np.real(K))
            K2 = 2.0 * np.real(Kpp)
        else:
            K1 = k1_literal
            K2 = 2.0 * np.real(Kpp) - K1
        # d_r of K2 under the integral: d_r[e^{i(r-r')k} m m'*] =
        # e^{i(r-r')k} (ik m + d_r m) m'*, and the frozen part uses
        # d_r m(r,0) from the zero-energy sweep.
        A1 = phase * (1j * k[None, :] * m + J.dm_dr[:, act])
        dKpp = 0.25 * (A1 * ((2.0 / np.pi) * w * mu_vals)[None, :]) @ np.conj(A.T)
        C1 = (phase * (1j * k * cos_w)[None, :]) @ np.conj(phase.T)
        dm0 = J.dm_dr_zero
        dK1_lit = 0.5 * (np.outer(dm0, m0) * np.real(C) + np.outer(m0, m0) * np.real(C1))
        if resonant:
            dK2 = 2.0 * np.real(dKpp)
        else:
            dK2 = 2.0 * np.real(dKpp) - dK1_lit
        per_block = {}
        if bump is None:
            from .grids import lp_bump
            bump = lp_bump()
        for j in range(kg.j_min, 1):
            blk = bump.block(j, kg.j_min, kg.j_max, k)
            wj = (2.0 / np.pi) * w * mu_vals * blk * 0.25
            # m(r,r';k) split: A D A'* - m0 m0' C-part
            Kj = (A * wj[None, :]) @ np.conj(A.T) \
                - np.outer(m0, m0) * ((phase * wj[None, :]) @ np.conj(phase.T))
            dKj = (A1 * wj[None, :]) @ np.conj(A.T) \
                - np.outer(dm0, m0) * ((phase * wj[None, :]) @ np.conj(phase.T)) \
                - np.outer(m0, m0) * ((phase * (1j * k * wj)[None, :]) @ np.conj(phase.T))
            per_block[j] = (Kj, dKj)
        k1_norm = float(np.abs(k1_literal).max())
    return KernelDecomposition(
        support=mu.support, r_nodes=r, K=np.real(K),
        Kpp=Kpp, Kmm=Kmm, Kpm=Kpm, Kmp=Kmp,
        K1=K1, K2=K2, K3=K3, dK2_dr=dK2, per_block=per_block,
        resonant=resonant, k1_literal_norm=k1_norm,
        mesh_sub=float(np.max(np.diff(r))),
    )


# ---------------------------------------------------------------------------
# bound verification
# ---------------------------------------------------------------------------

def _offdiag_mask(r: np.ndarray, mesh: float):
    rr = r[:, None]
    rp = r[None, :]
    return (np.abs(rr - rp) >= 4.0 * mesh) & (rr + rp >= 1.0)


def _binned_sup(x: np.ndarray, y: np.ndarray, lo: float, hi: float, nbins: int):
    edges = np.geomspace(lo, hi, nbins + 1)
    centers, sups = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (x >= a) & (x < b)
        if sel.sum() >= 3:
            centers.append(np.sqrt(a * b))
            sups.append(y[sel].max())
    return np.asarray(centers), np.asarray(sups)


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    good = (x > 0) & (y > 0)
    if good.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(x[good]), np.log(y[good]), 1)[0])


def verify_high_energy_bounds(D: KernelDecomposition) -> dict:
    """Envelope constants and decay slopes for the high-energy regrouping.

    C2 = sup <r-r'>^2 |K2| and C3 = sup (r+r')|K3| over the grid (away from
    the diagonal zone |r-r'| < 4h and the corner r+r' < 1); the diagonal
    slope fits |K3(r,r)| against (r+r') in [10, 100] by binned suprema.
    """
    if D.support != "high":
        raise ValueError("high-energy report needs a support='high' decomposition")
    r = D.r_nodes
    mask = _offdiag_mask(r, D.mesh_sub)
    dr = np.abs(r[:, None] - r[None, :])
    sr = r[:, None] + r[None, :]
    C2 = float((np.sqrt(1.0 + dr**2) ** 2 * np.abs(D.K2))[mask].max())
    C3 = float((sr * np.abs(D.K3))[mask].max())
    diag = np.abs(np.diagonal(D.K3))
    x = 2.0 * r
    lo, hi = 10.0, min(100.0, 0.9 * x.max())
    centers, sups = _binned_sup(x, diag, lo, hi, 8)
    slope_K3 = _loglog_slope(centers, sups)
    cx, cs = _binned_sup(dr[mask].ravel(), np.abs(D.K2)[mask].ravel(),
                         max(8.0 * D.mesh_sub, 1.0), 0.45 * r.max(), 8)
    slope_K2 = _loglog_slope(cx, cs)
    return {
        "C2": C2,
        "C3": C3,
        "K3_diag_slope": slope_K3,
        "K3_diag_bins": [centers.tolist(), sups.tolist()],
        "K2_offdiag_slope": slope_K2,
    }


def verify_low_energy_bounds(D: KernelDecomposition, J: JostTable) -> dict:
    """Low-energy envelopes: |K2| <~ |r-r'|^-1, |d_r K2| <~ |r-r'|^-2, and
    the per-block claim |d_r K_j| <= C min(2^{2j}, |r-r'|^-3 2^-j)."""
    if D.support != "low":
        raise ValueError("low-energy report needs a support='low' decomposition")
    r = D.r_nodes
    mask = _offdiag_mask(r, D.mesh_sub)
    dr = np.abs(r[:, None] - r[None, :])
    C_K2 = float((dr * np.abs(D.K2))[mask].max())
    C_dK2 = float((dr**2 * np.abs(D.dK2_dr))[mask].max())
    # fit the first clean decade above the diagonal exclusion zone; the
    # envelope crosses through its |r-r'|^-2 regime there
    lo = 8.0 * D.mesh_sub
    cx, cs = _binned_sup(dr[mask].ravel(), np.abs(D.dK2_dr)[mask].ravel(),
                         lo, 10.0 * lo, 8)
    slope_dK2 = _loglog_slope(cx, cs)
    block_C = {}
    corner = (r[:, None] + r[None, :]) >= 1.0
    for j, (Kj, dKj) in D.per_block.items():
        env = np.minimum(4.0 ** j, 2.0 ** (-j) / np.maximum(dr, 1e-80) ** 3)
        ratio = np.abs(dKj)[corner] / env[corner]
        block_C[j] = float(ratio.max())
    # finite-difference cross-check of d_r K2 at interior sample points
    rng = np.random.default_rng(7)
    nn = len(r)
    fd_err = 0.0
    scale = np.abs(D.dK2_dr).max()
    for _ in range(20):
        i = int(rng.integers(2, nn - 2))
        jx = int(rng.integers(0, nn))
        if abs(i - jx) < 3:
            continue
        fd = (D.K2[i + 1, jx] - D.K2[i - 1, jx]) / (r[i + 1] - r[i - 1])
        fd_err = max(fd_err, abs(fd - D.dK2_dr[i, jx]) / scale)
    return {
        "C_K2": C_K2,
        "C_dK2": C_dK2,
        "dK2_slope": slope_dK2,
        "dK2_bins": [cx.tolist(), cs.tolist()],
        "block_C": block_C,
        "block_C_max": max(block_C.values()) if block_C else float("nan"),
        "k1_over_K": D.k1_literal_norm / max(np.abs(D.K).max(), 1e-300)
        if D.resonant else None,
        "fd_crosscheck_rel": fd_err,
    }


def hormander_scan(D: KernelDecomposition, pairs: list[tuple[float, float]]) -> dict:
    """sup over pairs of int_{|r'-r1| > 2|r1-r2|} |K~(r1,r') - K~(r2,r')| dr',
    with K~ the K2 grouping (trapezoid in r' on the kernel sub-grid)."""
    r = D.r_nodes
    w = np.empty_like(r)
    w[1:-1] = 0.5 * (r[2:] - r[:-2])
    w[0] = 0.5 * (r[1] - r[0])
    w[-1] = 0.5 * (r[-1] - r[-2])
    vals = []
    for r1, r2 in pairs:
        i1 = int(np.argmin(np.abs(r - r1)))
        i2 = int(np.argmin(np.abs(r - r2)))
        if i1 == i2:
            vals.append(0.0)
            continue
        sep = 2.0 * abs(r[i1] - r[i2])
        sel = np.abs(r - r[i1]) > sep
        vals.append(float(np.sum(w[sel] * np.abs(D.K2[i1, sel] - D.K2[i2, sel]))))
    return {"sup": max(vals) if vals else 0.0, "values": vals}
