"""
Metric fields g_ij on the lattice and conformal changes e^{2φ}g.

A MetricField owns its inverse and volume density; derived curvature is computed once
on first access (``metric.curvature``) and cached for the lifetime of the object.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from cflow.exceptions import GeometryError
from cflow.grid.field import Field
from cflow.grid.lattice import Grid4

logger = logging.getLogger(__name__)

PHI_CAP = 20.0


@dataclass(frozen=True, eq=False)
class MetricField:
    grid:  Grid4
    g:     np.ndarray
    g_inv: np.ndarray = field(init=False, repr=False)
    vol:   np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != self.grid.dims + (4, 4):
            raise GeometryError(f"metric must have shape {self.grid.dims + (4, 4)}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise GeometryError("metric has non-finite entries")
        g = 0.5 * (g + np.swapaxes(g, -1, -2))

        # Sylvester: all leading principal minors positive
        for k in range(1, 5):
            minors = np.linalg.det(g[..., :k, :k])
            if np.any(minors <= 0):
                bad = np.unravel_index(int(np.argmin(minors)), self.grid.dims)
                raise GeometryError(f"metric not positive-definite at node {bad} (minor {k})")

        g_inv = np.linalg.inv(g)
        defect = np.max(np.abs(g @ g_inv - np.eye(4)))
        if defect > 1e-10:
            raise GeometryError(f"metric inverse defect {defect:.2e}; metric too ill-conditioned")

        for name, arr in (("g", g), ("g_inv", g_inv), ("vol", np.sqrt(np.linalg.det(g)))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # ------------------------------------------------------------ factories -- #
    @classmethod
    def flat(cls, grid: Grid4, diagonal: Optional[Sequence[float]] = None) -> "MetricField":
        diag = np.ones(4) if diagonal is None else np.asarray(diagonal, dtype=float)
        return cls(grid, np.broadcast_to(np.diag(diag), grid.dims + (4, 4)).copy())

    @classmethod
    def conformally_flat(cls, grid: Grid4, phi: np.ndarray,
                         diagonal: Optional[Sequence[float]] = None) -> "MetricField":
        return conformal_metric(phi, cls.flat(grid, diagonal))

    # ---------------------------------------------------------------- views -- #
    @property
    def is_flat(self) -> bool:
        """True when g is the identity at every node (the spectral fast path's domain)."""
        return bool(np.max(np.abs(self.g - np.eye(4))) == 0.0)

    def as_field(self) -> Field:
        return Field(self.grid, "sym2", self.g)

    def volume(self) -> float:
        return self.grid.integrate(np.ones(self.grid.dims), self.vol)

    def max_inverse_eigenvalue(self) -> float:
        return float(np.max(np.linalg.eigvalsh(self.g_inv)))

    def raise_index(self, t: np.ndarray) -> np.ndarray:
        """T^i_j = g^{ik} T_kj for a (0,2) tensor."""
        return np.einsum("...ik,...kj->...ij", self.g_inv, t)

    @cached_property
    def christoffel(self) -> np.ndarray:
        from cflow.geometry.curvature import christoffels
        return christoffels(self)

    @cached_property
    def curvature(self):
        from cflow.geometry.curvature import curvature
        return curvature(self)


def conformal_metric(phi: np.ndarray, base: MetricField) -> MetricField:
    """e^{2φ}·base with caches recomputed."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != base.grid.dims:
        raise GeometryError(f"conformal factor must be scalar on {base.grid.dims}, got {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise GeometryError("conformal factor has non-finite entries")
    if np.max(np.abs(phi)) > PHI_CAP:
        raise GeometryError(f"|phi| exceeds the cap {PHI_CAP}; e^(2 phi) would overflow the metric")
    return MetricField(base.grid, np.exp(2.0 * phi)[..., None, None] * base.g)
