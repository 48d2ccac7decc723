"""
The flow loop: step, monitor, stop on stationarity, final time or divergence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Union

import numpy as np

from cflow.configs.base import FlowConfig
from cflow.energy.functional import LocalEnergyProfile, local_energy_profile
from cflow.exceptions import CFlowError, FlowDiverged
from cflow.flow.monitor import is_monotone, lemma_bounds, monitor
from cflow.flow.state import DiagnosticsRecord, ExitReason, FlowState
from cflow.flow.stepper import step_with
from cflow.geometry.metric import MetricField
from cflow.maps.map_field import MapField
from cflow.utils.factory import StepperFactory, _ensure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowResult:
    state:         FlowState
    reason:        ExitReason
    message:       str = ""
    monotone:      bool = True
    concentration: Optional[LocalEnergyProfile] = None
    bounds:        Dict[str, float] = field(default_factory=dict)

    @property
    def final(self) -> DiagnosticsRecord:
        return self.state.history[-1]

    def summary(self) -> Dict[str, Any]:
        out = {
            "exit_reason":     self.reason.value,
            "t_final":         self.state.t,
            "energy_final":    self.final.energy,
            "grad_norm_final": self.final.grad_norm,
            "steps":           self.state.step,
            "monotone":        self.monotone,
            "lemma_bounds":    self.bounds,
        }
        if self.concentration is not None:
            out["concentration"] = self.concentration.to_dict()
        if self.message:
            out["message"] = self.message
        return out


def _finite(rec: DiagnosticsRecord) -> bool:
    return all(np.isfinite(v) for v in rec.to_dict().values())


def _concentration(u: MapField, metric: MetricField, cfg: FlowConfig) -> Optional[LocalEnergyProfile]:
    R = cfg.concentration_radius or min(0.5, min(u.grid.lengths) / 8.0)
    try:
        return local_energy_profile(u, metric, R)
    except CFlowError as e:
        logger.warning(f"local energy profile unavailable: {e}")
        return None


def run_flow(u0: MapField, metric: MetricField, cfg: Union[Dict, FlowConfig],
             on_record: Optional[Callable[[DiagnosticsRecord], None]] = None,
             on_snapshot: Optional[Callable[[FlowState], None]] = None) -> FlowResult:
    """
    Integrate ∂_t u = −𝓛(u) from ``u0``.

    Stationarity is tested at monitor points only (every ``monitor_every`` steps and
    at the first and last state).
    """
    cfg     = _ensure(cfg, FlowConfig)
    stepper = StepperFactory.create(cfg.method, cfg)
    dt      = stepper.time_step(metric)
    logger.info(f"flow start: method={cfg.method} functional={cfg.functional} dt={dt:.4e} "
                f"t_max={cfg.t_max} grid={u0.grid.dims} target={u0.target.kind}")

    def _record(st: FlowState, grad=None) -> FlowState:
        rec = monitor(st, metric, cfg.functional, grad=grad)
        if on_record is not None:
            on_record(rec)
        return st.recorded(rec)

    state   = _record(FlowState(u0))
    reason  = None
    message = ""
    t_end   = cfg.t_max * (1.0 - 1e-12)

    while reason is None:
        last = state.last
        if not _finite(last):
            reason, message = ExitReason.DIVERGED, f"non-finite diagnostics at step {state.step}"
            break
        if last.step == state.step and last.grad_norm < cfg.grad_tol:
            reason = ExitReason.CONVERGED
            break
        if state.t >= t_end or (cfg.max_steps is not None and state.step >= cfg.max_steps):
            reason = ExitReason.TIME_UP
            break

        h = min(dt, cfg.t_max - state.t)
        try:
            state = step_with(stepper, state, metric, h)
        except FlowDiverged as e:
            reason, message = ExitReason.DIVERGED, str(e)
            state = e.state
            break

        at_end = state.t >= t_end or (cfg.max_steps is not None and state.step >= cfg.max_steps)
        if state.step % cfg.monitor_every == 0 or at_end:
            state = _record(state)
        if cfg.snapshot_every and state.step % cfg.snapshot_every == 0 and on_snapshot is not None:
            on_snapshot(state)

    # make sure the history ends at the returned state
    if state.last.step != state.step:
        state = _record(state)

    monotone = is_monotone(state.history)
    if not monotone:
        logger.warning("energy increased between monitor points beyond round-off")
    concentration = _concentration(state.u, metric, cfg) if reason is ExitReason.DIVERGED else None
    if reason is ExitReason.DIVERGED:
        logger.error(f"flow diverged at t={state.t:.6e}: {message}")
    else:
        logger.info(f"flow stop: {reason.value} at t={state.t:.6e} after {state.step} steps, "
                    f"E={state.last.energy:.10e} |L|inf={state.last.grad_norm:.3e}")

    return FlowResult(state=state, reason=reason, message=message, monotone=monotone,
                      concentration=concentration, bounds=lemma_bounds(state.history))
