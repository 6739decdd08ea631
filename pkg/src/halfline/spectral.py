"""Generalized eigenfunctions, the distorted transform, and its inverse.

The eigenfunction normalized like sin(rk) in the free case is

    e~(r,k) = [f(r,k) conj(f(0,k)) - conj(f(r,k)) f(0,k)] / (2i f(0,k)),

whose numerator is 2i Im(f(r,k) conj(f(0,k))), a real solution of the
Dirichlet problem.  We therefore store the real table u(r,k) =
Im(f(r,k) conj(f(0,k))) and divide by f(0,k) on demand: every transform and
every multiplier application then reduces to real matrix products against u,
with per-k complex scalings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grids import RadialGrid, SpectralGrid
from .jost import BoundStateSet, JostTable, ScatteringData, volterra_sweep
from .potentials import PotentialModel

__all__ = [
    "Eigenbasis",
    "SpectralCoefficients",
    "scattering_coeffs",
    "eigenfunction",
    "build_eigenbasis",
    "forward_transform",
    "inverse_transform",
    "project_continuous",
    "lift_radial",
    "lower_radial",
]

_NORM = np.sqrt(2.0 / np.pi)


# ---------------------------------------------------------------------------
# expansion coefficients
# ---------------------------------------------------------------------------

def scattering_coeffs(S: ScatteringData, k: np.ndarray | None = None,
                      k_eps: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """c_plus(k) = conj(f(0,k)) / (2i f(0,k)) and c_minus = -1/(2i).

    Below k_eps in the resonant case the limit value built from d_k f(0,0)
    is used (the 0/0 ratio is continuous there but numerically unreliable).
    A vanishing f(0,k) at positive k is a fatal inconsistency: the Wronskian
    forbids it.
    """
    if k is None:
        k = S.k
        f0 = S.f0
    else:
        k = np.atleast_1d(np.asarray(k, dtype=float))
        idx = np.searchsorted(S.k, k)
        idx = np.clip(idx, 0, len(S.k) - 1)
        near = np.abs(S.k[idx] - k) <= 1e-9 * np.maximum(1.0, k)
        if not np.all(near):
            raise ValueError("requested wavenumbers are not grid nodes")
        f0 = S.f0[idx]
    if np.any((np.abs(f0) == 0.0) & (k > 0)):
        raise RuntimeError(
            "f(0,k) vanished at positive wavenumber; scattering data inconsistent")
    c_plus = np.conj(f0) / (2j * f0)
    resonant = S.resonance_magnitude < k_eps
    if resonant and np.abs(S.dk_f0_at_0) > 0:
        c0 = np.conj(S.dk_f0_at_0) / (2j * S.dk_f0_at_0)
        c_plus = np.where(k < k_eps, c0, c_plus)
    c_minus = np.full_like(c_plus, -1.0 / 2j)
    return c_plus, c_minus


# ---------------------------------------------------------------------------
# the eigenbasis
# ---------------------------------------------------------------------------

@dataclass
class Eigenbasis:
    """Distorted eigenfunctions on RadialGrid x SpectralGrid.

    u holds the real numerator Im(f(r,k) conj(f(0,k))); e~(r,k) = u/f(0,k).
    """

    rgrid: RadialGrid
    kgrid: SpectralGrid
    u: np.ndarray
    f0: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray
    resonant: bool
    k_eps: float = 1e-3

    @property
    def etilde(self) -> np.ndarray:
        """Full complex table e~(r,k); materializes nr x nk complex."""
        return self.u / self.f0[None, :]

    def etilde_column(self, j: int) -> np.ndarray:
        return self.u[:, j] / self.f0[j]

    def multiplier_weights(self, mu_vals: np.ndarray) -> np.ndarray:
        """Real k-weights (2/pi) w_k mu(k)/|f0(k)|^2 of the kernel form."""
        return (2.0 / np.pi) * self.kgrid.weights * mu_vals / np.abs(self.f0) ** 2

    def multiplier_matvec(self, mu_vals: np.ndarray, f_batch: np.ndarray) -> np.ndarray:
        """Apply the continuous-spectrum part of the multiplier mu(sqrt(H)).

        f_batch: (..., nr) real samples; returns the same shape.  Pure real
        GEMMs: M f = U diag((2/pi) w_k mu/|f0|^2) U^T diag(w_r) f.
        """
        f_batch = np.asarray(f_batch)
        single = f_batch.ndim == 1
        fb = np.atleast_2d(f_batch)
        g = (fb * self.rgrid.weights[None, :]) @ self.u
        g *= self.multiplier_weights(mu_vals)[None, :]
        out = g @ self.u.T
        return out[0] if single else out

    def high_k_deviation(self) -> tuple[np.ndarray, float]:
        """sup_r |e~(r,k) - sin(rk)| per k >= 1, and sup_k k * deviation."""
        sel = np.nonzero(self.kgrid.nodes >= 1.0)[0]
        dev = np.empty(len(sel))
        r = self.rgrid.nodes
        for a, j in enumerate(sel):
            dev[a] = np.abs(self.etilde_column(j) - np.sin(r * self.kgrid.nodes[j])).max()
        return dev, float((self.kgrid.nodes[sel] * dev).max())


def eigenfunction(J: JostTable, S: ScatteringData, k_eps: float = 1e-3) -> Eigenbasis:
    """Assemble the eigenbasis from a full-row Jost table.

    J must store every radial node (use build_eigenbasis for the chunked,
    memory-lean construction at scale).
    """
    if len(J.row_indices) != J.rgrid.n or np.any(np.diff(J.row_indices) != 1):
        raise ValueError("eigenfunction() needs a JostTable with all radial rows")
    r = J.rgrid.nodes
    k = J.kgrid.nodes
    f = np.exp(1j * np.outer(r, k)) * J.m
    u = np.imag(f * np.conj(S.f0)[None, :])
    resonant = S.resonance_magnitude < k_eps
    c_plus, c_minus = scattering_coeffs(S, k_eps=k_eps)
    return Eigenbasis(rgrid=J.rgrid, kgrid=J.kgrid, u=u, f0=S.f0.copy(),
                      c_plus=c_plus, c_minus=c_minus, resonant=resonant,
                      k_eps=k_eps)


def build_eigenbasis(P: PotentialModel, rgrid: RadialGrid, kgrid: SpectralGrid,
                     k_eps: float = 1e-3, k_chunk: int = 1024) -> Eigenbasis:
    """Sweep-and-collapse construction of the eigenbasis at scale.

    Peak memory is one k-chunk of complex rows; the stored table is the real
    u only.
    """
    Vn = P(rgrid.nodes)
    r = rgrid.nodes
    k = kgrid.nodes
    nr, nk = len(r), len(k)
    u = np.empty((nr, nk))
    f0 = np.empty(nk, dtype=complex)
    rows = np.arange(nr)
    for lo in range(0, nk, k_chunk):
        sl = slice(lo, min(nk, lo + k_chunk))
        res = volterra_sweep(Vn, r, k[sl], row_indices=rows, k_chunk=k_chunk)
        f0[sl] = res.f0
        tmp = res.m_rows
        tmp *= np.conj(res.f0)[None, :]
        tmp *= np.exp(1j * np.outer(r, k[sl]))
        u[:, sl] = tmp.imag
        del tmp, res
    res0 = volterra_sweep(Vn, r, np.array([0.0]), derivatives=True)
    mag0 = float(np.abs(res0.f0[0]))
    resonant = mag0 < k_eps
    sc = ScatteringData(
        k=k, f0=f0, f0p=None, dk_f0_at_0=complex(res0.dk_f0[0]),
        resonance_magnitude=mag0, wronskian_defect=None, S0=None, T0=None,
        tail_error=P.tail_r_moment(rgrid.r_max), smooth_c_plus_ok=bool(P.beta > 4.0),
    )
    c_plus, c_minus = scattering_coeffs(sc, k_eps=k_eps)
    return Eigenbasis(rgrid=rgrid, kgrid=kgrid, u=u, f0=f0,
                      c_plus=c_plus, c_minus=c_minus, resonant=resonant,
                      k_eps=k_eps)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

@dataclass
class SpectralCoefficients:
    """Transform values on the spectral grid plus bound-state components."""

    kgrid: SpectralGrid
    values: np.ndarray
    bound_components: np.ndarray

    def norm2_continuous(self) -> float:
        return float(np.sqrt(self.kgrid.weights @ np.abs(self.values) ** 2))

    def norm2_total(self) -> float:
        return float(np.sqrt(self.kgrid.weights @ np.abs(self.values) ** 2
                             + np.sum(np.abs(self.bound_components) ** 2)))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,re_F,im_F\n")
            for k, v in zip(self.kgrid.nodes, self.values):
                fh.write("%.17g,%.17g,%.17g\n" % (k, v.real, v.imag))


def forward_transform(E: Eigenbasis, f: np.ndarray,
                      bound_states: BoundStateSet | None = None) -> SpectralCoefficients:
    """(F f)(k) = sqrt(2/pi) int_0^inf conj(e~(r,k)) f(r) dr by grid quadrature.

    Warns when f has not decayed at r_max (the truncated quadrature is then
    untrustworthy).  bound_components are quadrature inner products against
    the bound states, when provided.
    """
    f = np.asarray(f)
    fmax = np.abs(f).max() if f.size else 0.0
    if fmax > 0 and np.abs(f[-1]) > 1e-8 * fmax:
        warnings.warn("input is not negligible at r_max; transform is truncated",
                      stacklevel=2)
    g = E.u.T @ (E.rgrid.weights * f)
    values = _NORM * g / np.conj(E.f0)
    comps = (bound_states.components(f) if bound_states is not None and len(bound_states)
             else np.empty(0))
    return SpectralCoefficients(kgrid=E.kgrid, values=values, bound_components=comps)


def inverse_transform(E: Eigenbasis, F) -> np.ndarray:
    """f(r) = sqrt(2/pi) int_0^inf e~(r,k) F(k) dk on the spectral grid."""
    vals = F.values if isinstance(F, SpectralCoefficients) else np.asarray(F)
    weights = E.kgrid.weights * vals / E.f0
    return _NORM * (E.u @ weights)


def project_continuous(B: BoundStateSet | None, f: np.ndarray) -> np.ndarray:
    """Remove the bound-state components (identity when there are none)."""
    if B is None or len(B) == 0:
        return np.array(f, copy=True)
    return B.project_out(f)


# ---------------------------------------------------------------------------
# radial 3D <-> half-line conjugation
# ---------------------------------------------------------------------------

def lift_radial(f: np.ndarray, rgrid: RadialGrid) -> np.ndarray:
    """f~ = sqrt(4 pi) r f(r); unitary from radial L2(R^3) to L2(0, inf)."""
    return np.sqrt(4.0 * np.pi) * rgrid.nodes * np.asarray(f)


def lower_radial(f_half: np.ndarray, rgrid: RadialGrid) -> np.ndarray:
    """Inverse of lift_radial; the r = 0 value is the limit of f~/r taken
    through the first two positive nodes (even extrapolation in r^2, since a
    smooth radial function has vanishing odd derivatives at the origin)."""
    f_half = np.asarray(f_half)
    r = rgrid.nodes
    out = np.empty_like(f_half, dtype=np.result_type(f_half, float))
    out[1:] = f_half[1:] / (np.sqrt(4.0 * np.pi) * r[1:])
    g1, g2 = out[1], out[2]
    q1, q2 = r[1] ** 2, r[2] ** 2
    out[0] = (g1 * q2 - g2 * q1) / (q2 - q1)
    return out
