"""
Smooth band-limited test data on the lattice.

Used for the randomized checks (gradient consistency, Bochner, trace-free identity)
and for the ``affine_plus_modes`` initial maps.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from cflow.grid.lattice import Grid4


def fourier_mode(grid: Grid4, wavevector: Sequence[int], phase: float = 0.0) -> np.ndarray:
    """sin(2π Σ k_i x_i / L_i + phase) on the nodes."""
    arg = phase
    for i, x in enumerate(grid.coords()):
        arg = arg + 2.0 * np.pi * int(wavevector[i]) * x / grid.lengths[i]
    return np.broadcast_to(np.sin(arg), grid.dims).copy()


def random_smooth_field(grid: Grid4, ncomp: int, rng: np.random.Generator,
                        amplitude: float = 1.0, n_modes: int = 3, max_wave: int = 1,
                        axes: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Sum of ``n_modes`` random low modes per component, shape ``dims + (ncomp,)``.

    ``axes`` restricts the wavevectors to those node axes (the others stay 0), so
    refinement studies can refine just the axes the data depend on.  The result is
    scaled to max-norm ``amplitude``.
    """
    axes = (0, 1, 2, 3) if axes is None else tuple(axes)
    out  = np.zeros(grid.dims + (ncomp,))
    for a in range(ncomp):
        for _ in range(n_modes):
            k = np.zeros(4, dtype=int)
            while not np.any(k):
                for i in axes:
                    k[i] = rng.integers(-max_wave, max_wave + 1)
            out[..., a] += rng.normal() * fourier_mode(grid, k, rng.uniform(0.0, 2.0 * np.pi))
    peak = np.max(np.abs(out))
    return out if peak == 0 else amplitude * out / peak
