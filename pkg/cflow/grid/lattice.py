"""
Periodic 4-D lattice: finite differences, quadrature and the flat spectral solve.

Arrays living on the lattice have shape ``(*dims, *components)``: the four node axes
first (axis 3 fastest in C order), components trailing.  Every operator here is pure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from cflow.exceptions import FieldError

logger = logging.getLogger(__name__)

NODE_AXES = (0, 1, 2, 3)


@dataclass(frozen=True)
class Grid4:
    """Periodic lattice with ``dims[i]`` nodes over period ``lengths[i]`` per axis."""

    dims:    Tuple[int, int, int, int]
    lengths: Tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        dims    = tuple(int(d) for d in self.dims)
        lengths = tuple(float(v) for v in self.lengths)
        if len(dims) != 4 or len(lengths) != 4:
            raise FieldError(f"Grid4 needs 4 dims and 4 lengths, got {dims} / {lengths}")
        for i, d in enumerate(dims):
            if d < 8 or d % 2:
                raise FieldError(f"dims[{i}]={d}: every axis needs an even node count >= 8")
        for i, v in enumerate(lengths):
            if not np.isfinite(v) or v <= 0:
                raise FieldError(f"lengths[{i}]={v} must be a positive finite period")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lengths", lengths)

    # ----------------------------------------------------------- geometry --- #
    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.dims

    @property
    def spacing(self) -> Tuple[float, float, float, float]:
        return tuple(L / n for L, n in zip(self.lengths, self.dims))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    def coordinate(self, axis: int) -> np.ndarray:
        """Node coordinates ``i*h`` along ``axis``, shaped to broadcast over the lattice."""
        self._check_axis(axis)
        shape = [1, 1, 1, 1]
        shape[axis] = self.dims[axis]
        return (np.arange(self.dims[axis]) * self.spacing[axis]).reshape(shape)

    def coords(self) -> Tuple[np.ndarray, ...]:
        return tuple(self.coordinate(a) for a in NODE_AXES)

    def torus_distance(self, center: Tuple[int, int, int, int]) -> np.ndarray:
        """Minimal-image flat distance from the node ``center`` to every node."""
        r2 = np.zeros(self.dims)
        for a in NODE_AXES:
            L  = self.lengths[a]
            dx = self.coordinate(a) - center[a] * self.spacing[a]
            dx = dx - L * np.round(dx / L)
            r2 = r2 + dx ** 2
        return np.sqrt(r2)

    # ---------------------------------------------------------- stencils --- #
    def _check_axis(self, axis: int):
        if axis not in NODE_AXES:
            raise FieldError(f"axis {axis} out of range 0..3")

    def _check_field(self, f: np.ndarray):
        if f.shape[:4] != self.dims:
            raise FieldError(f"field shape {f.shape} does not live on grid {self.dims}")
        if not np.all(np.isfinite(f)):
            raise FieldError("non-finite entries in field")

    def d1(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Central first difference, no validation (hot path)."""
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * self.spacing[axis])

    def diff(self, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
        """
        Central difference of ``order`` 1 or 2 along ``axis`` (periodic wraparound).

        Order 2 is the composition D∘D, so mixed and pure second derivatives share one
        stencil family and the discrete Hessian is symmetric.
        """
        self._check_axis(axis)
        self._check_field(f)
        if order == 1:
            return self.d1(f, axis)
        if order == 2:
            return self.d1(self.d1(f, axis), axis)
        raise FieldError(f"diff order must be 1 or 2, got {order}")

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """All four first differences, derivative slot inserted right after the node axes."""
        return np.stack([self.d1(f, a) for a in NODE_AXES], axis=4)

    def laplacian0(self, f: np.ndarray) -> np.ndarray:
        """Flat Laplacian Σ D_a D_a (negative semidefinite)."""
        return sum(self.d1(self.d1(f, a), a) for a in NODE_AXES)

    def bilaplacian0(self, f: np.ndarray) -> np.ndarray:
        return self.laplacian0(self.laplacian0(f))

    # -------------------------------------------------------- quadrature --- #
    def integrate(self, f: np.ndarray, vol: np.ndarray) -> float:
        """Σ f·vol·∏h over nodes (trapezoid rule on the periodic lattice)."""
        if vol.shape != self.dims:
            raise FieldError(f"volume density shape {vol.shape} != grid {self.dims}")
        if np.any(vol <= 0):
            raise FieldError("volume density must be positive at every node")
        if f.shape != self.dims:
            raise FieldError(f"integrand must be scalar on the grid, got shape {f.shape}")
        return float(np.sum(f * vol) * self.cell_volume)

    # ---------------------------------------------------------- spectral --- #
    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """
        Magnitude of the D∘D Laplacian symbol, Σ sin²θ_a / h_a², on the rfftn layout
        (last node axis halved).
        """
        lam = np.zeros(self.dims[:3] + (self.dims[3] // 2 + 1,))
        for a in NODE_AXES:
            n = self.dims[a]
            m = np.fft.rfftfreq(n) * n if a == 3 else np.fft.fftfreq(n) * n
            s = np.sin(2.0 * np.pi * m / n) / self.spacing[a]
            shape = [1, 1, 1, 1]
            shape[a] = m.size
            lam = lam + (s ** 2).reshape(shape)
        return lam

    def spectral_solve_bilaplacian(self, rhs: np.ndarray, alpha: float) -> np.ndarray:
        """Solve ``(Id + alpha·Δ₀²) w = rhs`` component-wise by FFT."""
        if rhs.size == 0:
            raise FieldError("cannot solve on a zero-size field")
        self._check_field(rhs)
        if alpha < 0:
            raise FieldError(f"alpha must be non-negative, got {alpha}")
        if alpha == 0:
            return np.array(rhs, dtype=float, copy=True)

        extra  = rhs.ndim - 4
        denom  = 1.0 + alpha * self.laplacian_symbol ** 2
        denom  = denom.reshape(denom.shape + (1,) * extra)
        f_hat  = np.fft.rfftn(rhs, axes=NODE_AXES)
        w      = np.fft.irfftn(f_hat / denom, s=self.dims, axes=NODE_AXES)
        logger.debug(f"spectral bilaplacian solve alpha={alpha:.3e} on {self.dims}")
        return w
