"""Run configuration and pipeline assembly shared by the CLI and the
acceptance suite.

A pipeline bundles the grids, potential, scattering data, bound states and
eigenbasis for one configuration; builds are cached per configuration key so
the acceptance criteria can share the expensive tables.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .grids import RadialGrid, SpectralGrid, build_radial_grid, build_spectral_grid, lp_bump
from .jost import (BoundStateSet, JostTable, ScatteringData, build_jost_table,
                   detect_resonance, find_bound_states, scattering_at_origin)
from .potentials import (PotentialModel, aubin_potential, free_potential,
                         load_tabulated_potential)
from .spectral import Eigenbasis, build_eigenbasis

__all__ = ["RunConfig", "Pipeline", "build_pipeline", "clear_cache",
           "REFERENCE"]


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run; embedded in every output."""

    potential: str = "aubin"
    a: float = 1.0
    table_path: str | None = None
    r_max: float = 200.0
    n: int = 8192
    grading: str = "uniform"
    j_min: int = -6
    j_max: int = 4
    k_eps: float = 1e-3
    resonance_eps: float = 1e-3
    kernel_max_rows: int = 512
    seed: int = 0

    def validate(self) -> None:
        if self.potential not in ("aubin", "free", "table"):
            raise ValueError(f"unknown potential {self.potential!r}")
        if self.potential == "aubin" and not self.a > 0:
            raise ValueError("aubin potential needs a > 0")
        if self.potential == "table" and not self.table_path:
            raise ValueError("table potential needs a file path")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if self.n < 16:
            raise ValueError(f"n={self.n} too small (need >= 16)")
        if self.j_min > self.j_max:
            raise ValueError("inverted dyadic range")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def scaled(self, r_max: float) -> "RunConfig":
        """Same mesh, different truncation radius (n scales with r_max)."""
        n = max(16, int(round(self.n * r_max / self.r_max)))
        return replace(self, r_max=r_max, n=n)


REFERENCE = RunConfig()


def make_potential(config: RunConfig) -> PotentialModel:
    if config.potential == "aubin":
        return aubin_potential(config.a)
    if config.potential == "free":
        return free_potential()
    return load_tabulated_potential(config.table_path)


@dataclass
class Pipeline:
    """Lazy bundle of the per-configuration objects."""

    config: RunConfig
    potential: PotentialModel
    rgrid: RadialGrid
    kgrid: SpectralGrid
    _scattering: ScatteringData | None = None
    _bound: BoundStateSet | None = None
    _eigenbasis: Eigenbasis | None = None
    _jost: JostTable | None = None

    @property
    def scattering(self) -> ScatteringData:
        if self._scattering is None:
            self._scattering = scattering_at_origin(self.potential, self.rgrid, self.kgrid)
        return self._scattering

    @property
    def bound_states(self) -> BoundStateSet:
        if self._bound is None:
            self._bound = find_bound_states(self.potential, self.rgrid)
        return self._bound

    @property
    def eigenbasis(self) -> Eigenbasis:
        if self._eigenbasis is None:
            self._eigenbasis = build_eigenbasis(
                self.potential, self.rgrid, self.kgrid, k_eps=self.config.k_eps)
        return self._eigenbasis

    @property
    def jost_table(self) -> JostTable:
        if self._jost is None:
            self._jost = build_jost_table(
                self.potential, self.rgrid, self.kgrid,
                max_rows=self.config.kernel_max_rows)
        return self._jost

    def resonance_report(self) -> dict:
        rep = detect_resonance(self.potential, self.rgrid, self.config.resonance_eps)
        rep["potential"] = self.potential.label
        return rep

    def release(self) -> None:
        """Drop the heavy tables (the config and grids stay)."""
        self._eigenbasis = None
        self._jost = None


_CACHE: dict[str, Pipeline] = {}


def build_pipeline(config: RunConfig, cache: bool = True) -> Pipeline:
    config.validate()
    key = config.to_json()
    if cache and key in _CACHE:
        return _CACHE[key]
    P = make_potential(config)
    rgrid = build_radial_grid(config.r_max, config.n, config.grading)
    kgrid = build_spectral_grid(config.j_min, config.j_max, config.r_max)
    pipe = Pipeline(config=config, potential=P, rgrid=rgrid, kgrid=kgrid)
    if cache:
        if len(_CACHE) >= 3:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = pipe
    return pipe


def clear_cache() -> None:
    _CACHE.clear()
