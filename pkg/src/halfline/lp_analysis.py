"""Weighted L^p machinery: A_p checks, norm scans, and the square function.

The radial reduction turns L^p(R^3) boundedness of a multiplier into a
weighted half-line problem with weight r^(2-p); that weight is an A_p weight
exactly for 3/2 < p < 3, and the window experiments below exhibit the
breakdown outside that range as growth of operator-norm lower bounds under
domain refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import BumpFunction, RadialGrid, SpectralGrid, lp_bump
from .jost import BoundStateSet
from .spectral import Eigenbasis, project_continuous

__all__ = [
    "WeightSpec",
    "SquareFunctionResult",
    "lp_norm",
    "ap_ratio",
    "ap_scan",
    "estimate_opnorm",
    "opnorm_test_family",
    "square_function",
    "lp_window_experiment",
]


@dataclass(frozen=True)
class WeightSpec:
    """Lebesgue exponent p with power weight w(r) = r^s.

    For the radial-reduction weight, s = 2 - p (equivalently the norm weight
    r^(2/p - 1) raised to the p-th power).
    """

    p: float
    s: float

    def __post_init__(self):
        if not 1.0 < self.p < np.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @classmethod
    def radial(cls, p: float) -> "WeightSpec":
        return cls(p=p, s=2.0 - p)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def lp_norm(f: np.ndarray, p: float, rgrid: RadialGrid, s: float = 0.0) -> float:
    """|| r^s f ||_Lp(0,inf) by grid quadrature.

    The r = 0 node never contributes: every admissible integrand there
    either vanishes (Dirichlet data) or is weighted to zero.
    """
    if not 1.0 <= p < np.inf:
        raise ValueError("p must lie in [1, inf)")
    r = rgrid.nodes
    vals = np.abs(np.asarray(f)) ** p
    with np.errstate(divide="ignore"):
        w = np.where(r > 0, r ** (s * p), 0.0)
    return float((rgrid.weights @ (w * vals)) ** (1.0 / p))


def _lp_norm_batch(F: np.ndarray, p: float, rgrid: RadialGrid, s: float) -> np.ndarray:
    """Column-wise || r^s F[:, j] ||_p."""
    r = rgrid.nodes
    with np.errstate(divide="ignore"):
        w = np.where(r > 0, r ** (s * p), 0.0)
    return (rgrid.weights @ (w[:, None] * np.abs(F) ** p)) ** (1.0 / p)


# ---------------------------------------------------------------------------
# A_p ratios
# ---------------------------------------------------------------------------

def _power_average(e: float, a: float, b: float) -> tuple[float, bool, bool]:
    """Average of r^e over [a, b]: (value, divergent, logarithmic)."""
    if a == 0.0:
        if e <= -1.0:
            return np.inf, True, e == -1.0
        return b**e / (e + 1.0), False, False
    if e == -1.0:
        return float(np.log(b / a) / (b - a)), False, True
    return float((b ** (e + 1.0) - a ** (e + 1.0)) / ((e + 1.0) * (b - a))), False, False


def ap_ratio(s: float, p: float, a: float, b: float) -> dict:
    """The A_p bracket (avg of w)(avg of w^(-p'/p))^(p/p') for w = r^s on [a,b].

    Closed-form power integration; intervals touching the origin are flagged
    divergent when an exponent reaches -1 (logarithmic exactly at -1).
    """
    if not 0.0 <= a < b:
        raise ValueError("need 0 <= a < b")
    spec = WeightSpec(p=p, s=s)
    e1 = s
    e2 = -s * spec.p_conj / p
    v1, d1, l1 = _power_average(e1, a, b)
    v2, d2, l2 = _power_average(e2, a, b)
    divergent = d1 or d2
    value = np.inf if divergent else float(v1 * v2 ** (p / spec.p_conj))
    return {
        "value": value,
        "divergent": divergent,
        "logarithmic": l1 or l2,
        "exponents": (e1, e2),
    }


def ap_scan(p: float, intervals: list[tuple[float, float]] | None = None) -> dict:
    """Supremum of the A_p bracket for the radial weight w = r^(2-p).

    Divergence is decided exactly by exponent comparison (2-p <= -1 iff
    p >= 3; the conjugate exponent crosses -1 iff p <= 3/2), so the reported
    flag is independent of the interval family; the supremum is taken over
    the default family of origin intervals [0, b] and dyadic translates.
    """
    s = 2.0 - p
    spec = WeightSpec.radial(p)
    e2 = -s * spec.p_conj / p
    divergent = (s <= -1.0) or (e2 <= -1.0)
    if intervals is None:
        bs = np.geomspace(1e-2, 1e2, 25)
        intervals = [(0.0, float(b)) for b in bs]
        for a in bs:
            intervals += [(float(a), float(a) * 1.5), (float(a), float(a) * 2.0)]
    sup = 0.0
    for a, b in intervals:
        res = ap_ratio(s, p, a, b)
        if not res["divergent"]:
            sup = max(sup, res["value"])
    return {
        "p": p,
        "s": s,
        "sup_ratio": sup,
        "divergent": bool(divergent),
        "flag": "divergent" if divergent else "bounded",
    }


# ---------------------------------------------------------------------------
# operator-norm lower bounds
# ---------------------------------------------------------------------------

def _smooth_bump(t: np.ndarray) -> np.ndarray:
    """C-infinity bump supported on |t| < 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def _edge_ramp(x: np.ndarray) -> np.ndarray:
    """Smooth 0 -> 1 ramp on [0, 1]."""
    from .grids import _eta_derivs
    return _eta_derivs(np.asarray(x, dtype=float), 1.0, 0)


def opnorm_test_family(rgrid: RadialGrid, rng: np.random.Generator,
                       packet_freqs: tuple[float, ...] = (1.0, 4.0, 16.0),
                       n_random: int = 32) -> list[tuple[str, np.ndarray]]:
    """Test inputs for weighted-norm scans.

    Dyadic bumps at scales 2^i, wave packets at dyadic frequencies, bumps
    translated toward r_max, deterministic power-profile superpositions
    r^a on [1, 0.9 r_max] (these witness the dual-side growth at p > 3), and
    seeded random superpositions of the deterministic members.
    """
    r = rgrid.nodes
    r_max = rgrid.r_max
    members: list[tuple[str, np.ndarray]] = []
    c = 1.0
    i = 0
    while c <= r_max / 4.0:
        members.append((f"bump[2^{i}]", _smooth_bump((r - c) / (0.5 * c))))
        c *= 2.0
        i += 1
    for frac in (0.55, 0.7, 0.85):
        cc = frac * r_max
        members.append((f"far[{frac:g}]", _smooth_bump((r - cc) / (r_max / 25.0))))
    for q in packet_freqs:
        env = _smooth_bump((r - r_max / 4.0) / (r_max / 8.0))
        members.append((f"packet[{q:g}]", np.sin(q * r) * env))
    taper = _edge_ramp(r - 1.0) * (1.0 - _edge_ramp((r - 0.8 * r_max) / (0.1 * r_max)))
    for a in (-1.0, -2.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            prof = np.where(r > 0, r**a, 0.0)
        members.append((f"ramp[{a:+.2f}]", prof * taper))
    base = [f for _, f in members]
    for t in range(n_random):
        coef = rng.standard_normal(len(base))
        f = sum(cc * bb for cc, bb in zip(coef, base)) / np.sqrt(len(base))
        members.append((f"rand[{t}]", f))
    # normalize in L2 so ids are comparable across levels
    out = []
    for name, f in members:
        nrm = rgrid.norm2(f)
        if nrm == 0:
            continue
        out.append((name, f / nrm))
    return out


def estimate_opnorm(apply, p: float, s: float, family: list[tuple[str, np.ndarray]],
                    rgrid: RadialGrid) -> dict:
    """Lower bound on the weighted p -> p operator norm from a test family.

    apply maps a batch of columns (nr x nf) to output columns; the bound is
    the largest ratio || r^s T f ||_p / || r^s f ||_p over the family.
    """
    if not family:
        raise ValueError("family must be nonempty")
    F = np.stack([f for _, f in family], axis=1)
    in_norms = _lp_norm_batch(F, p, rgrid, s)
    if np.any(in_norms == 0):
        raise ValueError("zero-norm family member")
    out = apply(F)
    out_norms = _lp_norm_batch(out, p, rgrid, s)
    ratios = out_norms / in_norms
    imax = int(np.argmax(ratios))
    return {
        "bound": float(ratios[imax]),
        "maximizer_id": family[imax][0],
        "ratios": {name: float(v) for (name, _), v in zip(family, ratios)},
    }


# ---------------------------------------------------------------------------
# square function
# ---------------------------------------------------------------------------

@dataclass
class SquareFunctionResult:
    """Per-block outputs and their pointwise l2 aggregate."""

    blocks: np.ndarray           # (n_blocks, nr)
    sf: np.ndarray               # (nr,)
    j_range: tuple[int, int]
    block_js: list = field(default_factory=list)

    def check_pointwise(self) -> float:
        return float(np.abs(self.sf**2 - np.sum(np.abs(self.blocks) ** 2, axis=0)).max())


def square_function(E: Eigenbasis, B: BoundStateSet | None, bump: BumpFunction,
                    f: np.ndarray, j_range: tuple[int, int] | None = None) -> SquareFunctionResult:
    """S_H f = (sum_j |Phi_j(sqrt(H)) f|^2)^(1/2) on the continuous subspace.

    Blocks at the ends of the retained range are cumulative tails, so the
    block symbols sum to exactly 1 over the spectral grid.
    """
    kg = E.kgrid
    j_lo, j_hi = j_range if j_range is not None else (kg.j_min, kg.j_max)
    if j_lo < kg.j_min or j_hi > kg.j_max:
        raise ValueError("requested blocks outside the spectral window")
    fc = project_continuous(B, f)
    k = kg.nodes
    blocks = []
    js = list(range(j_lo, j_hi + 1))
    for j in js:
        mu_vals = bump.block(j, j_lo, j_hi, k)
        blocks.append(E.multiplier_matvec(mu_vals, fc))
    blocks = np.asarray(blocks)
    sf = np.sqrt(np.sum(np.abs(blocks) ** 2, axis=0))
    return SquareFunctionResult(blocks=blocks, sf=sf, j_range=(j_lo, j_hi), block_js=js)


# ---------------------------------------------------------------------------
# the p-window experiment
# ---------------------------------------------------------------------------

def lp_window_experiment(
    build_level,
    p_list: tuple[float, ...] = (1.2, 1.4, 1.6, 1.8, 2.0, 2.5, 2.8, 3.2, 4.0),
    levels: tuple[float, ...] = (50.0, 100.0, 200.0),
    n_signs: int = 16,
    seed: int = 0,
    growth_threshold: float = 0.08,
    bump: BumpFunction | None = None,
) -> dict:
    """Weighted-norm lower bounds across truncation-refinement levels.

    build_level(r_max) must return (rgrid, Eigenbasis, BoundStateSet); node
    spacing should be held fixed as r_max grows (n proportional to r_max).
    For each of n_signs seeded random-sign Littlewood-Paley symbols the
    estimate_opnorm bound with weight s = 2/p - 1 is taken, worst case over
    signs; the per-p trend over levels is classified growing when the
    log-log slope of the bound against r_max exceeds growth_threshold.
    """
    if bump is None:
        bump = lp_bump()
    rng = np.random.default_rng(seed)
    results = {p: [] for p in p_list}
    maximizers = {p: [] for p in p_list}
    for r_max in levels:
        rgrid, E, B = build_level(r_max)
        fam_rng = np.random.default_rng(seed + 1000)
        family = opnorm_test_family(rgrid, fam_rng)
        F = np.stack([f for _, f in family], axis=1)
        Fc = np.stack([project_continuous(B, F[:, j]) for j in range(F.shape[1])], axis=1)
        G = E.u.T @ (rgrid.weights[:, None] * Fc)
        nblocks = E.kgrid.j_max - E.kgrid.j_min + 1
        signs = 1.0 - 2.0 * rng.integers(0, 2, size=(n_signs, nblocks))
        in_norms = {p: _lp_norm_batch(F, p, rgrid, 2.0 / p - 1.0) for p in p_list}
        best = {p: np.zeros(F.shape[1]) for p in p_list}
        for srow in signs:
            mu = random_sign_symbol(bump, srow, E.kgrid)
            d = E.multiplier_weights(mu)
            out = E.u @ (d[:, None] * G)
            for p in p_list:
                out_n = _lp_norm_batch(out, p, rgrid, 2.0 / p - 1.0)
                best[p] = np.maximum(best[p], out_n / in_norms[p])
        for p in p_list:
            imax = int(np.argmax(best[p]))
            results[p].append(float(best[p][imax]))
            maximizers[p].append(family[imax][0])
        del E, G
    rows = []
    classification = {}
    for p in p_list:
        b = np.asarray(results[p])
        slope = float(np.polyfit(np.log(np.asarray(levels)), np.log(b), 1)[0])
        cls = "growing" if slope > growth_threshold else "stable"
        classification[p] = {"slope": slope, "classification": cls}
        for lvl, bb, mid in zip(levels, b, maximizers[p]):
            rows.append({"p": p, "level": lvl, "bound": bb,
                         "maximizer_id": mid, "classification": cls})
    return {"rows": rows, "classification": classification,
            "levels": list(levels), "p_list": list(p_list),
            "growth_threshold": growth_threshold}


def random_sign_symbol(bump: BumpFunction, signs: np.ndarray, kgrid: SpectralGrid) -> np.ndarray:
    """Symbol values of sum_j s_j Phi_j on the spectral nodes."""
    k = kgrid.nodes
    out = np.zeros_like(k)
    for s, j in zip(signs, range(kgrid.j_min, kgrid.j_max + 1)):
        out += s * bump.block(j, kgrid.j_min, kgrid.j_max, k)
    return out
