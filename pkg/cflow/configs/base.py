"""
Pydantic config models for a cflow run.

If you change a field name here, touch:
  • utils.factory (TargetFactory / StepperFactory)
  • client.CFlowClient (scenario construction)
  • checks.suite (CheckConfig thresholds)
"""

import json
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from cflow.exceptions import ConfigError, ExpressionError
from cflow.target.base import GUARD
from cflow.utils.expression import parse as parse_expression

# --------------------------------------------------------------------------- #
# --------------------------------------------------------------------------- #
home_dir  = os.path.expanduser("~")
cflow_dir = os.environ.get("CFLOW_DIR") or os.path.join(home_dir, ".cflow")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --------------------------------------------------------------------------- #
#  Domain blocks                                                              #
# --------------------------------------------------------------------------- #
class GridConfig(_Strict):
    dims:    List[int]   = Field(...,                   description="Nodes per axis, 4 even integers >= 8")
    lengths: List[float] = Field([1.0, 1.0, 1.0, 1.0], description="Period of each axis")

    @field_validator("dims")
    @classmethod
    def _dims(cls, v):
        if len(v) != 4:
            raise ValueError(f"need exactly 4 dims, got {len(v)}")
        for i, d in enumerate(v):
            if d < 8 or d % 2:
                raise ValueError(f"dims[{i}]={d} must be even and >= 8")
        return v

    @field_validator("lengths")
    @classmethod
    def _lengths(cls, v):
        if len(v) != 4 or any(not x > 0 for x in v):
            raise ValueError("need 4 positive lengths")
        return v


class MetricConfig(_Strict):
    kind:     Literal["flat", "conformal"] = Field("flat")
    phi:      Optional[str]               = Field(None, description="Conformal factor φ(x0..x3); g = e^{2φ}·base")
    diagonal: Optional[List[float]]       = Field(None, description="Constant diagonal base metric (default identity)")

    @field_validator("phi")
    @classmethod
    def _phi(cls, v):
        if v is not None:
            try:
                parse_expression(v)
            except ExpressionError as e:
                raise ValueError(str(e)) from e
        return v

    @field_validator("diagonal")
    @classmethod
    def _diagonal(cls, v):
        if v is not None and (len(v) != 4 or any(not x > 0 for x in v)):
            raise ValueError("diagonal needs 4 positive entries")
        return v

    @model_validator(mode="after")
    def _kind_vs_phi(self):
        if self.kind == "conformal" and self.phi is None:
            raise ValueError("metric.phi: required when kind is 'conformal'")
        if self.kind == "flat" and self.phi is not None:
            raise ValueError("metric.phi: only allowed when kind is 'conformal'")
        return self


class TargetConfig(_Strict):
    kind:    Literal["torus", "ball"] = Field("torus")
    dim:     int                      = Field(..., ge=1, description="Target dimension n")
    K:       float                    = Field(0.0,     description="Sectional curvature (0 torus, < 0 ball)")
    periods: Optional[List[float]]    = Field(None,    description="Torus periods (default all 1)")

    @model_validator(mode="after")
    def _chart(self):
        if self.kind == "torus":
            if self.K != 0.0:
                raise ValueError(f"target.K: a torus target needs K = 0, got {self.K}")
            if self.periods is not None:
                if len(self.periods) != self.dim:
                    raise ValueError(f"target.periods: expected {self.dim} periods, got {len(self.periods)}")
                if any(not p > 0 for p in self.periods):
                    raise ValueError("target.periods: periods must be positive")
        else:
            if not self.K < 0.0:
                raise ValueError(f"target.K: a ball target needs K < 0, got {self.K}")
            if self.periods is not None:
                raise ValueError("target.periods: not allowed for a ball target")
        return self


class ModeConfig(_Strict):
    """amplitude · sin(2π Σ k_i x_i / L_i + phase) added to one target component."""

    axis:       Optional[int]             = Field(None, ge=0, le=3, description="Axis for a scalar wavevector")
    wavevector: Union[int, List[int]]     = Field(...,  description="Wavenumber along `axis`, or 4 integers")
    amplitude:  float                     = Field(...)
    component:  int                       = Field(0, ge=0)
    phase:      float                     = Field(0.0)

    @model_validator(mode="after")
    def _wave(self):
        if isinstance(self.wavevector, list):
            if len(self.wavevector) != 4:
                raise ValueError("wavevector: a vector wavevector needs 4 integers")
            if self.axis is not None:
                raise ValueError("axis: give either a scalar wavevector with axis, or a 4-vector")
        elif self.axis is None:
            raise ValueError("axis: required with a scalar wavevector")
        return self

    def as_vector(self) -> List[int]:
        if isinstance(self.wavevector, list):
            return list(self.wavevector)
        k = [0, 0, 0, 0]
        k[self.axis] = self.wavevector
        return k


class InitialMapConfig(_Strict):
    kind:        Literal["constant", "affine", "affine_plus_modes"] = Field("constant")
    linear_part: Optional[List[List[int]]] = Field(None, description="Integer n×4 homotopy class (torus only)")
    offset:      Optional[List[float]]     = Field(None, description="Constant added to the displacement")
    modes:       List[ModeConfig]          = Field(default_factory=list)

    @model_validator(mode="after")
    def _kind(self):
        if self.kind == "constant" and self.linear_part is not None:
            raise ValueError("initial_map.linear_part: not allowed for a constant map")
        if self.kind != "affine_plus_modes" and self.modes:
            raise ValueError("initial_map.modes: only allowed for kind 'affine_plus_modes'")
        return self


class FlowConfig(_Strict):
    method:         Literal["euler", "rk4", "imex"]  = Field("euler")
    functional:     Literal["conformal", "biharmonic"] = Field("conformal")
    cfl:            float           = Field(0.4,  gt=0, le=1, description="Explicit step as a fraction of the CFL limit")
    dt:             Optional[float] = Field(None, gt=0,       description="Fixed step for the IMEX method")
    t_max:          float           = Field(...,  gt=0,       description="Final time (no default: a run choice)")
    grad_tol:       float           = Field(1e-6, gt=0,       description="Stop when ‖𝓛(u)‖_∞ < grad_tol")
    max_steps:      Optional[int]   = Field(None, ge=1)
    monitor_every:  int             = Field(10,   ge=1)
    snapshot_every: int             = Field(0,    ge=0,       description="0 disables snapshots")
    concentration_radius: Optional[float] = Field(None, gt=0, description="Cutoff radius for the local energy profile at divergence")

    @model_validator(mode="after")
    def _dt(self):
        if self.method == "imex" and self.dt is None:
            raise ValueError("flow.dt: required for method 'imex'")
        return self


class CheckConfig(_Strict):
    only:           Optional[List[str]] = Field(None, description="Run just these checks")
    samples:        int   = Field(20,   ge=1,  description="Random draws per randomized check")
    amplitude:      float = Field(0.01, gt=0,  description="Max-norm of random map perturbations")
    eps:            float = Field(1e-4, gt=0)
    gradient_tol:   float = Field(1e-3, gt=0)
    bochner_tol:    float = Field(5e-3, gt=0)
    adjoint_tol:    float = Field(1e-2, gt=0)
    invariance_tol: float = Field(2e-2, gt=0,  description="Relative change of the energies under g -> e^{2φ}g")
    kappa_tol:      float = Field(0.1,  gt=0,  description="Change of κ under g -> e^{2φ}g, in units of 1 + ∫S²dv/12")
    sphere_tol:     float = Field(0.3,  gt=0,  description="Max |S - 12| on the round-sphere patch interior")
    identity_tol:   float = Field(1e-2, gt=0,  description="Energy-identity residual along a short flow")


# --------------------------------------------------------------------------- #
#  Composite run config                                                       #
# --------------------------------------------------------------------------- #
class RunConfig(_Strict):
    grid:        GridConfig
    metric:      MetricConfig          = Field(default_factory=MetricConfig)
    target:      TargetConfig
    initial_map: InitialMapConfig      = Field(default_factory=InitialMapConfig)
    flow:        Optional[FlowConfig]  = None
    check:       CheckConfig           = Field(default_factory=CheckConfig)
    seed:        int                   = Field(0, description="Seed for randomized checks")
    output_dir:  Optional[str]         = None
    history_db:  Optional[str]         = Field(None, description="SQLite run history; 'default' = $CFLOW_DIR/history.db")

    @model_validator(mode="after")
    def _consistency(self):
        n  = self.target.dim
        im = self.initial_map
        if im.linear_part is not None:
            if len(im.linear_part) != n or any(len(row) != 4 for row in im.linear_part):
                raise ValueError(f"initial_map.linear_part: must be {n}x4 for a {n}-dim target")
            if self.target.kind == "ball" and any(v != 0 for row in im.linear_part for v in row):
                raise ValueError("initial_map.linear_part: ball targets are contractible, must be zero")
        if im.offset is not None:
            if len(im.offset) != n:
                raise ValueError(f"initial_map.offset: expected {n} entries")
            if self.target.kind == "ball" and sum(y * y for y in im.offset) >= (1.0 - GUARD) ** 2:
                raise ValueError(f"initial_map.offset: must lie inside the ball, |y| < 1 - {GUARD:g}")
        for m in im.modes:
            if m.component >= n:
                raise ValueError(f"initial_map.modes.component: {m.component} >= target dim {n}")
        if self.flow is not None and self.flow.method == "imex" and self.metric.kind != "flat":
            raise ValueError("flow.method: 'imex' needs the flat metric")
        if self.flow is not None and self.flow.method == "imex" and self.metric.diagonal is not None \
                and any(d != 1.0 for d in self.metric.diagonal):
            raise ValueError("flow.method: 'imex' needs the identity metric")
        return self

    def history_db_path(self) -> Optional[str]:
        if self.history_db == "default":
            os.makedirs(cflow_dir, exist_ok=True)
            return os.path.join(cflow_dir, "history.db")
        return self.history_db


# --------------------------------------------------------------------------- #
#  Loading                                                                    #
# --------------------------------------------------------------------------- #
def _field_of(err: dict) -> str:
    loc = ".".join(str(p) for p in err.get("loc", ()))
    # model-level validators prefix their message with the field name
    msg = err.get("msg", "")
    if msg.startswith("Value error, "):
        msg = msg[len("Value error, "):]
    head = msg.split(":", 1)[0] if ":" in msg else ""
    if not head or " " in head:
        return loc
    if not loc or head.split(".")[0] == loc.split(".")[0]:
        return head
    return f"{loc}.{head}"


def config_from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        errors = e.errors()
        first  = _field_of(errors[0])
        detail = "; ".join(f"{_field_of(err) or '<root>'}: {err['msg']}" for err in errors)
        raise ConfigError(f"invalid config: {detail}", field=first) from e


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(data)
