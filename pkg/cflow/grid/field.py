from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from cflow.exceptions import FieldError
from cflow.grid.lattice import Grid4

# rank descriptor -> component shape (None = free, e.g. target dimension)
RANKS = {
    "scalar":      (),
    "vector":      (4,),
    "sym2":        (4, 4),
    "target":      None,
    "mixed":       None,
    "christoffel": (4, 4, 4),
    "riemann":     (4, 4, 4, 4),
}


@dataclass(frozen=True, eq=False)
class Field:
    """
    Immutable array on a Grid4, tagged with its rank.

    ``values`` has shape ``(*grid.dims, *components)`` and is made read-only on
    construction.
    """

    grid:   Grid4
    rank:   str
    values: np.ndarray

    def __post_init__(self):
        if self.rank not in RANKS:
            raise FieldError(f"unknown rank descriptor '{self.rank}'")
        vals = np.ascontiguousarray(self.values, dtype="<f8")
        if vals.shape[:4] != self.grid.dims:
            raise FieldError(f"values shape {vals.shape} does not match grid {self.grid.dims}")
        expected = RANKS[self.rank]
        if expected is not None and vals.shape[4:] != expected:
            raise FieldError(f"rank '{self.rank}' expects components {expected}, got {vals.shape[4:]}")
        if not np.all(np.isfinite(vals)):
            raise FieldError("field has non-finite entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def component_shape(self) -> Tuple[int, ...]:
        return self.values.shape[4:]

    @property
    def n_components(self) -> int:
        return int(np.prod(self.component_shape, dtype=int))

    def diff(self, axis: int, order: int = 1) -> "Field":
        return Field(self.grid, self.rank, self.grid.diff(self.values, axis, order))
