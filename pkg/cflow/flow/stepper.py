"""
Time steppers for ∂_t u = −𝓛(u).

Every stepper acts on the displacement increment and wraps once at the end, so the
torus linear part (the homotopy class) is never touched.  Ball maps that reach the
guard band raise ChartError; the runner turns that into a Diverged exit.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np

from cflow.energy.operator import operator_for
from cflow.exceptions import ChartError, FieldError, FlowDiverged, UnsupportedError
from cflow.flow.state import FlowState
from cflow.geometry.metric import MetricField
from cflow.maps.map_field import MapField

logger = logging.getLogger(__name__)

Operator = Callable[[MapField, MetricField], np.ndarray]

CFL_SYMBOL_MAX = 16.0


def explicit_dt(metric: MetricField, cfl: float) -> float:
    """cfl · h_min⁴ / (16 · (max eigenvalue of g⁻¹)²)."""
    if not 0.0 < cfl <= 1.0:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    lam = metric.max_inverse_eigenvalue() ** 2
    return cfl * metric.grid.h_min ** 4 / (CFL_SYMBOL_MAX * lam)


class Stepper(ABC):
    """One time step of the gradient flow for a fixed metric."""

    name: str = ""

    def __init__(self, operator: Optional[Operator] = None, functional: str = "conformal"):
        self.operator = operator or operator_for(functional)

    @abstractmethod
    def time_step(self, metric: MetricField) -> float:
        pass

    @abstractmethod
    def advance(self, u: MapField, metric: MetricField, dt: float) -> MapField:
        pass

    def _stage(self, u: MapField, increment: np.ndarray) -> MapField:
        return u.with_disp(u.disp + increment)

    def _finish(self, u: MapField, increment: np.ndarray) -> MapField:
        return u.with_disp(u.target.wrap(u.disp + increment))


class ExplicitEuler(Stepper):
    name = "euler"

    def __init__(self, cfl: float = 0.4, **kw):
        super().__init__(**kw)
        self.cfl = cfl

    def time_step(self, metric):
        return explicit_dt(metric, self.cfl)

    def advance(self, u, metric, dt):
        return self._finish(u, -dt * self.operator(u, metric))


class RungeKutta4(Stepper):
    name = "rk4"

    def __init__(self, cfl: float = 0.4, **kw):
        super().__init__(**kw)
        self.cfl = cfl

    def time_step(self, metric):
        return explicit_dt(metric, self.cfl)

    def advance(self, u, metric, dt):
        k1 = -self.operator(u, metric)
        k2 = -self.operator(self._stage(u, 0.5 * dt * k1), metric)
        k3 = -self.operator(self._stage(u, 0.5 * dt * k2), metric)
        k4 = -self.operator(self._stage(u, dt * k3), metric)
        return self._finish(u, dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)


class SpectralImex(Stepper):
    """
    (Id + dt Δ₀²) δ = −dt 𝓛(u),  u' = u + δ.

    Equivalent to (Id + dt Δ₀²) u' = u − dt(𝓛(u) − Δ₀²u); first order in dt.  Only
    valid when g is the identity, where Δ₀² is the leading part of 𝓛.
    """

    name = "imex"

    def __init__(self, dt: float = 1e-4, **kw):
        super().__init__(**kw)
        if not dt > 0:
            raise ValueError(f"IMEX dt must be positive, got {dt}")
        self.dt = dt

    def time_step(self, metric):
        return self.dt

    def advance(self, u, metric, dt):
        if not metric.is_flat:
            raise UnsupportedError("spectral IMEX needs the flat background metric g = Id")
        rhs = -dt * self.operator(u, metric)
        return self._finish(u, u.grid.spectral_solve_bilaplacian(rhs, dt))


# --------------------------------------------------------------------------- #
#  State-level wrappers                                                       #
# --------------------------------------------------------------------------- #
def step_with(stepper: Stepper, state: FlowState, metric: MetricField,
              dt: Optional[float] = None) -> FlowState:
    dt = stepper.time_step(metric) if dt is None else dt
    try:
        u_new = stepper.advance(state.u, metric, dt)
    except (ChartError, FieldError) as e:
        logger.error(f"step {state.step + 1} at t={state.t:.6e} left the admissible set: {e}")
        raise FlowDiverged(f"flow diverged at step {state.step + 1}: {e}", state=state) from e
    return state.advanced(u_new, dt)


def step_explicit(state: FlowState, metric: MetricField, cfl: float = 0.4,
                  method: str = "euler", functional: str = "conformal") -> FlowState:
    cls = RungeKutta4 if method == "rk4" else ExplicitEuler
    return step_with(cls(cfl=cfl, functional=functional), state, metric)


def step_imex(state: FlowState, metric: MetricField, dt: float,
              functional: str = "conformal") -> FlowState:
    return step_with(SpectralImex(dt=dt, functional=functional), state, metric)
