"""
Map fields u: M → N sampled on the lattice.

Torus targets carry an integer linear part A (the homotopy class) and a periodic
displacement v:

    u^a(x) = Σ_i A^a_i (p_a / L_i) x_i + v^a(x)

with p the target periods and L the grid lengths.  Ball targets are contractible, so
A = 0 and u = disp.  Only disp ever changes during a flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from cflow.exceptions import FieldError
from cflow.grid.field import Field
from cflow.grid.lattice import Grid4
from cflow.target.base import SpaceForm
from cflow.target.torus import FlatTorus


@dataclass(frozen=True, eq=False)
class MapField:
    grid:        Grid4
    target:      SpaceForm
    linear_part: np.ndarray
    disp:        np.ndarray

    def __post_init__(self):
        n = self.target.n
        A = np.asarray(self.linear_part)
        if A.shape != (n, 4):
            raise FieldError(f"linear_part must be {n}x4, got {A.shape}")
        if not np.issubdtype(A.dtype, np.integer):
            if not np.all(A == np.round(A)):
                raise FieldError("linear_part must be an integer matrix")
            A = np.round(A).astype(np.int64)
        if not self.is_torus and np.any(A != 0):
            raise FieldError("ball targets are contractible: linear_part must be zero")
        if A.flags.writeable:
            A = A.copy()
            A.setflags(write=False)

        disp = np.array(self.disp, dtype=float)
        if disp.shape != self.grid.dims + (n,):
            raise FieldError(f"disp must have shape {self.grid.dims + (n,)}, got {disp.shape}")
        if not np.all(np.isfinite(disp)):
            raise FieldError("map displacement has non-finite entries")
        if not self.is_torus:
            self.target.check_guard(disp)
        disp.setflags(write=False)

        object.__setattr__(self, "linear_part", A)
        object.__setattr__(self, "disp", disp)

    # ------------------------------------------------------------ factories -- #
    @classmethod
    def constant(cls, grid: Grid4, target: SpaceForm,
                 value: Optional[Sequence[float]] = None) -> "MapField":
        value = np.zeros(target.n) if value is None else np.asarray(value, dtype=float)
        return cls(grid, target, np.zeros((target.n, 4), dtype=np.int64),
                   np.broadcast_to(value, grid.dims + (target.n,)).copy())

    @classmethod
    def affine(cls, grid: Grid4, target: SpaceForm, linear_part,
               offset: Optional[Sequence[float]] = None) -> "MapField":
        base = cls.constant(grid, target, offset)
        return cls(grid, target, np.asarray(linear_part), base.disp)

    def with_disp(self, disp: np.ndarray) -> "MapField":
        """Same homotopy class, new displacement (the only way a flow changes a map)."""
        return MapField(self.grid, self.target, self.linear_part, disp)

    # ---------------------------------------------------------------- views -- #
    @property
    def is_torus(self) -> bool:
        return isinstance(self.target, FlatTorus)

    @property
    def slope(self) -> np.ndarray:
        """du of the linear part, [a, i]."""
        if not self.is_torus:
            return np.zeros((self.target.n, 4))
        L = np.asarray(self.grid.lengths)
        return self.linear_part * self.target.periods[:, None] / L[None, :]

    def linear_values(self) -> np.ndarray:
        out = np.zeros(self.grid.dims + (self.target.n,))
        for i, x in enumerate(self.grid.coords()):
            out = out + x[..., None] * self.slope[:, i]
        return out

    def points(self) -> np.ndarray:
        """Chart coordinates of u at every node (torus: wrapped into [0, p))."""
        if self.is_torus:
            return self.target.wrap(self.linear_values() + self.disp)
        return self.disp

    def wrapped(self) -> "MapField":
        """Normalise disp in its chart; ChartError if a ball map reached the guard band."""
        return self.with_disp(self.target.wrap(self.disp))

    def perturbed(self, v: np.ndarray, eps: float) -> "MapField":
        """u + εv using chart addition (coordinates are a vector space in both charts)."""
        return self.with_disp(self.disp + eps * np.asarray(v))

    def as_field(self) -> Field:
        return Field(self.grid, "target", self.disp)

    def sidecar(self) -> dict:
        return {"linear_part": self.linear_part.tolist(), "target": self.target.describe()}

    def same_class(self, other: "MapField") -> bool:
        return np.array_equal(self.linear_part, other.linear_part)
