"""
Dissipation monitors along the flow.

Along ∂_t u = −𝓛(u):
    ℰ(u(t)) + 2∫₀ᵗ‖∂_t u‖² = ℰ(u₀)                      energy identity
    ‖du(t)‖² + 2∫₀ᵗ‖∇̄τ‖² ≤ ‖du₀‖² + c t                 Dirichlet growth
    ∫|∇̃du|², ∫|du|⁴ bounded                              Hessian / quartic bounds

∂_t u is taken as −𝓛(u) itself; time integrals use the trapezoid rule over the
monitor points, so the identity defect only sees the time discretisation.
"""

from __future__ import annotations

import logging
from typing import Dict, Iterable, Optional

import numpy as np
import pandas as pd

from cflow.energy.functional import energy_densities
from cflow.energy.operator import operator_for
from cflow.flow.state import CSV_COLUMNS, DiagnosticsRecord, FlowState
from cflow.geometry.metric import MetricField
from cflow.maps import calculus as calc

logger = logging.getLogger(__name__)


def monitor(state: FlowState, metric: MetricField, functional: str = "conformal",
            grad: Optional[np.ndarray] = None) -> DiagnosticsRecord:
    """Diagnostics at ``state``; running integrals continue from ``state.last``."""
    u  = state.u
    du = calc.differential(u)
    d  = energy_densities(u, metric)
    L  = operator_for(functional)(u, metric) if grad is None else grad

    energy    = calc.l2(metric, d["conformal"] if functional == "conformal" else d["tension"])
    rate      = calc.l2(metric, calc.section_dot(u, L, L))
    tau       = calc.tension(u, metric, du)
    dtau      = calc.connection_on_section(u, tau, metric, du)
    tau_rate  = calc.l2(metric, calc.form_dot(u, metric, dtau, dtau))
    dirichlet = calc.l2(metric, d["dirichlet"])

    prev = state.last
    if prev is None:
        diss, tau_int, e0, dir0 = 0.0, 0.0, energy, dirichlet
    else:
        first = state.history[0]
        h     = state.t - prev.t
        diss    = prev.dissipation_integral + h * (prev.dissipation_rate + rate)       # 2·trapezoid
        tau_int = prev.tau_gradient_integral + h * (prev.tau_gradient_rate + tau_rate)
        e0, dir0 = first.energy, first.dirichlet

    growth = (dirichlet + tau_int - dir0) / state.t if state.t > 0 else 0.0
    rec = DiagnosticsRecord(
        t                     = state.t,
        step                  = state.step,
        energy                = energy,
        dissipation_integral  = diss,
        dirichlet             = dirichlet,
        hessian               = calc.l2(metric, d["hessian"]),
        quartic               = calc.l2(metric, d["quartic"]),
        grad_norm             = float(np.max(np.abs(L))) if L.size else 0.0,
        identity_residual     = identity_residual(energy, diss, e0),
        dissipation_rate      = rate,
        tau_gradient_rate     = tau_rate,
        tau_gradient_integral = tau_int,
        dirichlet_growth      = growth,
    )
    logger.debug(f"monitor step={state.step} t={state.t:.6e} E={energy:.10e} "
                 f"|L|inf={rec.grad_norm:.3e} resid={rec.identity_residual:.3e}")
    return rec


def identity_residual(energy: float, dissipation_integral: float, energy0: float) -> float:
    return abs(energy + dissipation_integral - energy0) / (abs(energy0) + 1.0)


def is_monotone(history: Iterable[DiagnosticsRecord]) -> bool:
    """ℰ_{k+1} ≤ ℰ_k + 10·eps·|ℰ_k| for consecutive records."""
    eps = np.finfo(float).eps
    energies = [r.energy for r in history]
    return all(b <= a + 10.0 * eps * abs(a) for a, b in zip(energies, energies[1:]))


def lemma_bounds(history: Iterable[DiagnosticsRecord]) -> Dict[str, float]:
    """Observed sup of the bounded quantities along a run."""
    recs = list(history)
    if not recs:
        return {}
    return {
        "sup_hessian":            max(r.hessian for r in recs),
        "sup_quartic":            max(r.quartic for r in recs),
        "sup_dirichlet":          max(r.dirichlet for r in recs),
        "dirichlet_growth":       max(r.dirichlet_growth for r in recs),
        "max_identity_residual":  max(r.identity_residual for r in recs),
        "energy_drop":            recs[0].energy - recs[-1].energy,
    }


def history_frame(history: Iterable[DiagnosticsRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.csv_row() for r in history], columns=list(CSV_COLUMNS))


def write_history_csv(history: Iterable[DiagnosticsRecord], path) -> None:
    history_frame(history).to_csv(path, index=False, float_format="%.17g")
