from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from cflow.maps.map_field import MapField

# exact CSV columns, in order
CSV_COLUMNS = (
    "t", "energy", "dissipation_integral", "dirichlet", "hessian",
    "quartic", "grad_norm", "identity_residual",
)


class ExitReason(str, Enum):
    CONVERGED = "Converged"
    TIME_UP   = "TimeUp"
    DIVERGED  = "Diverged"


@dataclass(frozen=True)
class DiagnosticsRecord:
    t:                     float
    step:                  int
    energy:                float
    dissipation_integral:  float      # 2∫‖∂_t u‖² dt
    dirichlet:             float      # ‖du‖²
    hessian:               float      # ‖∇̃du‖²
    quartic:               float      # ∫|du|⁴
    grad_norm:             float      # ‖𝓛(u)‖_∞
    identity_residual:     float
    dissipation_rate:      float      # ‖𝓛(u)‖², integrand of the dissipation
    tau_gradient_rate:     float      # ‖∇̄τ‖²
    tau_gradient_integral: float      # 2∫‖∇̄τ‖² dt
    dirichlet_growth:      float      # (‖du‖² + 2∫‖∇̄τ‖² − ‖du₀‖²)/t, 0 at t = 0

    def csv_row(self) -> Dict[str, float]:
        return {k: getattr(self, k) for k in CSV_COLUMNS}

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class FlowState:
    """Map, time and the diagnostics gathered so far.  Never mutated; steps return new states."""

    u:       MapField
    t:       float = 0.0
    step:    int = 0
    history: Tuple[DiagnosticsRecord, ...] = field(default_factory=tuple)

    def advanced(self, u: MapField, dt: float) -> "FlowState":
        return replace(self, u=u, t=self.t + dt, step=self.step + 1)

    def recorded(self, rec: DiagnosticsRecord) -> "FlowState":
        return replace(self, history=self.history + (rec,))

    @property
    def last(self) -> Optional[DiagnosticsRecord]:
        return self.history[-1] if self.history else None
