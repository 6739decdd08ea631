"""Potential models for the half-line operator -d^2/dr^2 + V(r).

All built-ins satisfy the decay hypotheses |V| <~ <r>^-beta and
|V'| <~ <r>^-(beta+1) with beta > 3.  Derivatives of built-ins are closed
form: the low-energy kernel bounds consume V' directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .grids import RadialGrid

__all__ = [
    "PotentialModel",
    "AubinParameters",
    "aubin_potential",
    "free_potential",
    "eval_phi",
    "eval_dphi_da",
    "load_tabulated_potential",
    "check_decay",
]


@dataclass(frozen=True)
class PotentialModel:
    """Evaluatable potential with decay metadata.

    value/derivative accept scalar or array r >= 0; beta is the claimed decay
    exponent (|V| <~ <r>^-beta); tail_r_moment(r0) returns the closed-form or
    extrapolated truncation integral int_r0^inf r |V(r)| dr.
    """

    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    beta: float
    label: str
    _tail: Callable[[float], float] | None = None

    def __call__(self, r):
        return self.value(np.asarray(r, dtype=float))

    def tail_r_moment(self, r0: float) -> float:
        """int_{r0}^inf r' |V(r')| dr', the truncation error driver."""
        if self._tail is not None:
            return float(self._tail(r0))
        # power-law extrapolation from the claimed decay exponent
        c = abs(self.value(np.asarray(r0))) * (1.0 + r0 * r0) ** (self.beta / 2.0)
        if self.beta <= 2.0:
            return float("inf")
        return float(c * r0 ** (2.0 - self.beta) / (self.beta - 2.0))


@dataclass(frozen=True)
class AubinParameters:
    """Scale parameter of the Aubin soliton family."""

    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"Aubin scale must be positive, got {self.a}")


def eval_phi(r, a: float):
    """Aubin soliton phi(r, a) = (3a)^(1/4) (1 + a r^2)^(-1/2)."""
    AubinParameters(a)
    r = np.asarray(r, dtype=float)
    return (3.0 * a) ** 0.25 / np.sqrt(1.0 + a * r * r)


def eval_dphi_da(r, a: float):
    """d/da of the Aubin soliton, (3a)^(1/4) (1 - a r^2) / (4a (1+a r^2)^(3/2)).

    Decays like c/r with c != 0, which is what makes the linearized operator
    resonant at zero energy.
    """
    AubinParameters(a)
    r = np.asarray(r, dtype=float)
    u = 1.0 + a * r * r
    return (3.0 * a) ** 0.25 * (1.0 - a * r * r) / (4.0 * a * u**1.5)


def phi_derivatives(r, a: float):
    """(phi, phi', phi'') in closed form, for residual checks of the soliton ODE."""
    r = np.asarray(r, dtype=float)
    c = (3.0 * a) ** 0.25
    u = 1.0 + a * r * r
    phi = c * u**-0.5
    dphi = -c * a * r * u**-1.5
    d2phi = -c * a * u**-1.5 + 3.0 * c * a * a * r * r * u**-2.5
    return phi, dphi, d2phi


def aubin_potential(a: float) -> PotentialModel:
    """Linearization potential V = -5 phi^4(., a) = -15a (1 + a r^2)^-2.

    The radial operator -d_rr + V with Dirichlet condition has a zero-energy
    resonance (the zero mode is r d_a phi), and beta = 4.
    """
    AubinParameters(a)

    def value(r):
        return -15.0 * a / (1.0 + a * r * r) ** 2

    def derivative(r):
        return 60.0 * a * a * r / (1.0 + a * r * r) ** 3

    def tail(r0):
        return 15.0 / (2.0 * (1.0 + a * r0 * r0))

    return PotentialModel(value=value, derivative=derivative, beta=4.0,
                          label=f"aubin(a={a:g})", _tail=tail)


def free_potential() -> PotentialModel:
    """V = 0; the whole pipeline must reduce to the sine transform."""
    return PotentialModel(
        value=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        derivative=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        beta=10.0,
        label="free",
        _tail=lambda r0: 0.0,
    )


def load_tabulated_potential(path) -> PotentialModel:
    """Load a two-column (r, V) table with a '# beta=<float>' header line.

    The model interpolates with a natural cubic spline; V' is the spline
    derivative; r outside the tabulated range evaluates to 0.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    beta = None
    rows = []
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("beta"):
                try:
                    beta = float(body.split("=", 1)[1])
                except (IndexError, ValueError) as exc:
                    raise ValueError(f"{path}:{ln}: malformed beta header {line!r}") from exc
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected 'r V' pair, got {line!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: non-numeric row {line!r}") from exc
    if beta is None:
        raise ValueError(f"{path}: missing '# beta=<float>' header line")
    if len(rows) < 4:
        raise ValueError(f"{path}: need at least 4 tabulated points for a cubic, got {len(rows)}")
    tab = np.asarray(rows)
    r_tab, v_tab = tab[:, 0], tab[:, 1]
    if np.any(np.diff(r_tab) <= 0):
        raise ValueError(f"{path}: r column must be strictly increasing")
    spline = CubicSpline(r_tab, v_tab, bc_type="natural")
    dspline = spline.derivative()
    lo, hi = r_tab[0], r_tab[-1]

    def value(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = (r >= lo) & (r <= hi)
        out[inside] = spline(r[inside])
        return out

    def derivative(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = (r >= lo) & (r <= hi)
        out[inside] = dspline(r[inside])
        return out

    return PotentialModel(value=value, derivative=derivative, beta=beta,
                          label=f"table({path.name})")


def check_decay(P: PotentialModel, grid: RadialGrid) -> dict:
    """Certify the decay hypotheses on the sampled grid.

    Reports C_V = sup <r>^beta |V| and C_V' = sup <r>^(beta+1) |V'| over the
    grid, and passes iff beta > 3 and neither weighted envelope is still
    growing on the outer quarter of the grid (a finite sample is always
    finite, so growth is what betrays an overstated beta).
    """
    r = grid.nodes
    w = np.sqrt(1.0 + r * r)
    wv = w**P.beta * np.abs(P.value(r))
    wd = w ** (P.beta + 1.0) * np.abs(P.derivative(r))

    def tail_slope(vals):
        mask = (r >= grid.r_max / 4.0) & (vals > 0)
        if mask.sum() < 8:
            return 0.0
        x = np.log(r[mask])
        y = np.log(vals[mask])
        return float(np.polyfit(x, y, 1)[0])

    sv, sd = tail_slope(wv), tail_slope(wd)
    passed = (P.beta > 3.0) and (sv <= 0.05) and (sd <= 0.05)
    return {
        "C_V": float(wv.max(initial=0.0)),
        "C_Vp": float(wd.max(initial=0.0)),
        "beta": P.beta,
        "tail_slope_V": sv,
        "tail_slope_Vp": sd,
        "pass": bool(passed),
    }
