"""
Cross-module verification suite behind ``cflow check``.

Each check builds its own small scenario on the configured grid (and, where it makes
sense, the configured metric and target), evaluates one property and returns a
CheckResult.  Randomized checks draw from ``default_rng([seed, index])`` so that a
check's data do not depend on which other checks ran.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Any, Callable, Dict, List

import numpy as np

from cflow.energy import checks as echecks
from cflow.energy.functional import biharmonic_energy, conformal_energy, cutoff_bounds, total_energy
from cflow.energy.operator import c_harmonic_operator
from cflow.exceptions import CFlowError, ConfigError
from cflow.flow.runner import run_flow
from cflow.flow.state import FlowState
from cflow.flow.stepper import step_explicit
from cflow.geometry.curvature import bianchi_defect, christoffels, q_total, yamabe_quotient
from cflow.geometry.metric import MetricField, conformal_metric
from cflow.grid.container import read_field, write_field
from cflow.grid.field import Field
from cflow.grid.lattice import Grid4
from cflow.maps import calculus as calc
from cflow.maps.map_field import MapField
from cflow.maps.samples import fourier_mode, random_smooth_field
from cflow.target.ball import HyperbolicBall
from cflow.target.oracles import apply_riemann, fd_christoffel, fd_riemann
from cflow.target.torus import FlatTorus

logger = logging.getLogger(__name__)

CUTOFF_C          = 16.0
PHI_AMPLITUDE     = 0.15
CHRISTOFFEL_ORDER = 1.8
BIANCHI_ORDER     = 1.5
SPHERE_SPACING    = 1.0 / 32
SPHERE_MARGIN     = 3
IDENTITY_STEPS    = 40


@dataclass(frozen=True)
class CheckResult:
    name:      str
    passed:    bool
    value:     float
    threshold: float
    detail:    str = ""

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<34} {status}  value={self.value:.3e}  limit={self.threshold:.1e}  {self.detail}".rstrip()

    def to_dict(self) -> Dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "detail": self.detail}


@dataclass
class _Ctx:
    client: Any
    rng:    np.random.Generator

    @property
    def cfg(self):
        return self.client.config.check

    @property
    def grid(self):
        return self.client.grid

    @property
    def metric(self) -> MetricField:
        return self.client.metric

    @property
    def target(self):
        return self.client.target

    def torus(self) -> FlatTorus:
        if isinstance(self.target, FlatTorus):
            return self.target
        return FlatTorus(self.target.n)

    def linear_part(self) -> np.ndarray:
        lp = self.client.config.initial_map.linear_part
        if lp is not None and isinstance(self.target, FlatTorus) and np.any(np.asarray(lp)):
            return np.asarray(lp)
        A = np.zeros((self.target.n, 4), dtype=np.int64)
        for a in range(min(self.target.n, 4)):
            A[a, a] = 1
        return A

    def random_map(self, target=None, axes=(0, 1)) -> MapField:
        target = target or self.target
        disp = random_smooth_field(self.grid, target.n, self.rng, amplitude=self.cfg.amplitude, axes=axes)
        if isinstance(target, FlatTorus):
            return MapField(self.grid, target, self.linear_part(), disp)
        return MapField(self.grid, target, np.zeros((target.n, 4), dtype=np.int64), disp)

    def random_section(self, n: int, axes=(0, 1)) -> np.ndarray:
        return random_smooth_field(self.grid, n, self.rng, axes=axes)


CHECKS: Dict[str, Callable[[_Ctx], CheckResult]] = {}


def register(name: str):
    def deco(fn):
        CHECKS[name] = fn
        return fn
    return deco


def _result(name, value, threshold, detail="", upper=True) -> CheckResult:
    value = float(value)
    passed = bool(np.isfinite(value) and (value <= threshold if upper else value >= threshold))
    return CheckResult(name, passed, value, float(threshold), detail)


# --------------------------------------------------------------------------- #
#  grid                                                                       #
# --------------------------------------------------------------------------- #
@register("grid.translation")
def _translation(ctx: _Ctx) -> CheckResult:
    f = ctx.random_section(1)[..., 0]
    g = ctx.grid
    a = g.diff(np.roll(f, 1, axis=0), 1)
    b = np.roll(g.diff(f, 1), 1, axis=0)
    return _result("grid.translation", np.max(np.abs(a - b)), 0.0)


@register("grid.divergence_theorem")
def _divergence(ctx: _Ctx) -> CheckResult:
    f   = ctx.random_section(1, axes=None)[..., 0]
    g   = ctx.grid
    one = np.ones(g.dims)
    scale = g.integrate(np.abs(f), one) / g.h_min
    worst = max(abs(g.integrate(g.diff(f, a), one)) for a in range(4))
    return _result("grid.divergence_theorem", worst / scale, 1e-10)


@register("grid.spectral_solve")
def _spectral(ctx: _Ctx) -> CheckResult:
    g     = ctx.grid
    rhs   = ctx.random_section(2, axes=None)
    alpha = g.h_min ** 4
    w     = g.spectral_solve_bilaplacian(rhs, alpha)
    res   = w + alpha * g.bilaplacian0(w) - rhs
    return _result("grid.spectral_solve", np.max(np.abs(res)) / np.max(np.abs(rhs)), 1e-10)


# --------------------------------------------------------------------------- #
#  geometry                                                                   #
# --------------------------------------------------------------------------- #
@register("geometry.scalar_trace")
def _scalar_trace(ctx: _Ctx) -> CheckResult:
    cb = ctx.metric.curvature
    tr = np.trace(cb.ric_mixed(ctx.metric), axis1=-2, axis2=-1)
    return _result("geometry.scalar_trace", np.max(np.abs(cb.scal - tr)) / (1.0 + np.max(np.abs(cb.scal))), 1e-12)


@register("geometry.riemann_antisymmetry")
def _riem_antisym(ctx: _Ctx) -> CheckResult:
    riem = ctx.metric.curvature.riem
    scale = 1.0 + np.max(np.abs(riem))
    return _result("geometry.riemann_antisymmetry",
                   np.max(np.abs(riem + np.swapaxes(riem, -1, -2))) / scale, 1e-12)


@register("geometry.constant_scaling")
def _const_scaling(ctx: _Ctx) -> CheckResult:
    m = conformal_metric(np.full(ctx.grid.dims, 0.3), MetricField.flat(ctx.grid))
    return _result("geometry.constant_scaling", np.max(np.abs(m.curvature.riem)), 1e-10)


@register("geometry.flat_invariants")
def _flat_invariants(ctx: _Ctx) -> CheckResult:
    flat = MetricField.flat(ctx.grid)
    worst = max(abs(q_total(flat)), abs(yamabe_quotient(flat)))
    return _result("geometry.flat_invariants", worst, 1e-10, "kappa and quotient of the flat torus")


def _slab(ctx: _Ctx, refine: int = 1) -> Grid4:
    """Configured resolution along x0, x1 (times ``refine``); 8 nodes along x2, x3."""
    n0, n1 = ctx.grid.dims[:2]
    return Grid4((refine * n0, refine * n1, 8, 8), ctx.grid.lengths)


def _wave_phi(grid: Grid4):
    """φ = A sin(2πx0/L0) sin(2πx1/L1) and its gradient."""
    k0, k1 = (2 * np.pi / grid.lengths[a] for a in (0, 1))
    s0, c0 = np.sin(k0 * grid.coordinate(0)), np.cos(k0 * grid.coordinate(0))
    s1, c1 = np.sin(k1 * grid.coordinate(1)), np.cos(k1 * grid.coordinate(1))
    one  = np.ones(grid.dims)
    phi  = PHI_AMPLITUDE * s0 * s1 * one
    dphi = np.zeros(grid.dims + (4,))
    dphi[..., 0] = PHI_AMPLITUDE * k0 * c0 * s1 * one
    dphi[..., 1] = PHI_AMPLITUDE * k1 * s0 * c1 * one
    return phi, dphi


@register("geometry.kappa_conformal_invariance")
def _kappa_invariance(ctx: _Ctx) -> CheckResult:
    grid = _slab(ctx)
    flat = MetricField.flat(grid)
    m    = conformal_metric(_wave_phi(grid)[0], flat)
    gap  = abs(q_total(m) - q_total(flat))
    scale = grid.integrate(m.curvature.scal ** 2, m.vol) / 12.0
    return _result("geometry.kappa_conformal_invariance", gap / (1.0 + scale), ctx.cfg.kappa_tol,
                   f"|dkappa|={gap:.3e} scale={scale:.3e}")


@register("geometry.conformal_christoffels")
def _conformal_christoffels(ctx: _Ctx) -> CheckResult:
    eye = np.eye(4)
    errors = []
    for refine in (1, 2):
        grid = _slab(ctx, refine)
        phi, dphi = _wave_phi(grid)
        exact = (eye[:, :, None] * dphi[..., None, None, :]
                 + eye[:, None, :] * dphi[..., None, :, None]
                 - eye[None, :, :] * dphi[..., :, None, None])
        errors.append(np.max(np.abs(christoffels(MetricField.conformally_flat(grid, phi)) - exact)))
    order = math.log2(errors[0] / errors[1])
    return _result("geometry.conformal_christoffels", order, CHRISTOFFEL_ORDER,
                   f"max error {errors[0]:.3e} -> {errors[1]:.3e}", upper=False)


@register("geometry.bianchi_decay")
def _bianchi(ctx: _Ctx) -> CheckResult:
    defects = []
    for refine in (1, 2):
        grid = _slab(ctx, refine)
        defects.append(bianchi_defect(MetricField.conformally_flat(grid, _wave_phi(grid)[0])))
    order = math.log2(defects[0] / defects[1])
    return _result("geometry.bianchi_decay", order, BIANCHI_ORDER,
                   f"defect {defects[0]:.3e} -> {defects[1]:.3e}", upper=False)


@register("geometry.round_sphere")
def _round_sphere(ctx: _Ctx) -> CheckResult:
    # patch of the unit S⁴ chart φ = log(2/(1+|x|²)) at fixed spacing, centred in the box
    n    = ctx.grid.dims
    grid = Grid4(n, tuple(d * SPHERE_SPACING for d in n))
    r2   = sum((grid.coordinate(a) - grid.lengths[a] / 2) ** 2 for a in range(4))
    m    = MetricField.conformally_flat(grid, np.log(2.0 / (1.0 + r2)))
    w    = SPHERE_MARGIN
    inner = m.curvature.scal[w:-w, w:-w, w:-w, w:-w]
    return _result("geometry.round_sphere", np.max(np.abs(inner - 12.0)), ctx.cfg.sphere_tol,
                   f"interior S in [{inner.min():.3f}, {inner.max():.3f}]")


# --------------------------------------------------------------------------- #
#  target                                                                     #
# --------------------------------------------------------------------------- #
def _sample_points(ctx: _Ctx, m: int) -> np.ndarray:
    n = ctx.target.n
    if isinstance(ctx.target, HyperbolicBall):
        y = ctx.rng.normal(size=(m, n))
        r = ctx.rng.uniform(0.0, 0.9, size=(m, 1))
        return r * y / np.linalg.norm(y, axis=-1, keepdims=True)
    return ctx.rng.uniform(0.0, 1.0, size=(m, n))


@register("target.curvature_symmetries")
def _curv_sym(ctx: _Ctx) -> CheckResult:
    sf = ctx.target
    y  = _sample_points(ctx, 200)
    X, Y, Z, W = (ctx.rng.normal(size=y.shape) for _ in range(4))
    rxy = sf.curv_op(y, X, Y, Z)
    a = np.max(np.abs(rxy + sf.curv_op(y, Y, X, Z)))
    b = np.max(np.abs(sf.inner(y, rxy, W) + sf.inner(y, sf.curv_op(y, X, Y, W), Z)))
    scale = 1.0 + np.max(np.abs(rxy))
    return _result("target.curvature_symmetries", max(a, b) / scale, 1e-12)


@register("target.nonpositive_sectional")
def _nonpos(ctx: _Ctx) -> CheckResult:
    sf = ctx.target
    y  = _sample_points(ctx, 1000)
    X, Z = ctx.rng.normal(size=y.shape), ctx.rng.normal(size=y.shape)
    sec = sf.inner(y, sf.curv_op(y, X, Z, Z), X)
    scale = 1.0 + np.max(np.abs(sec))
    return _result("target.nonpositive_sectional", np.max(sec) / scale, 1e-12, "max <R(X,Z)Z,X> over 1000 samples")


@register("target.christoffel_oracle")
def _chris_oracle(ctx: _Ctx) -> CheckResult:
    sf = ctx.target
    y  = np.zeros(sf.n)
    y[0] = 0.5 if isinstance(sf, HyperbolicBall) else 0.3
    exact = sf.christoffel_N(y)
    err = np.max(np.abs(exact - fd_christoffel(sf, y)))
    return _result("target.christoffel_oracle", err / (1.0 + np.max(np.abs(exact))), 1e-6)


@register("target.riemann_oracle")
def _riem_oracle(ctx: _Ctx) -> CheckResult:
    sf = ctx.target
    y  = _sample_points(ctx, 1)[0] * 0.5
    X, Y, Z = (ctx.rng.normal(size=sf.n) for _ in range(3))
    exact = sf.curv_op(y, X, Y, Z)
    fd    = apply_riemann(fd_riemann(sf, y), X, Y, Z)
    return _result("target.riemann_oracle", np.max(np.abs(exact - fd)) / (1.0 + np.max(np.abs(exact))), 1e-5)


# --------------------------------------------------------------------------- #
#  maps                                                                       #
# --------------------------------------------------------------------------- #
def _affine(ctx: _Ctx) -> MapField:
    return MapField.affine(ctx.grid, ctx.torus(), ctx.linear_part())


@register("maps.affine_harmonic")
def _affine_harmonic(ctx: _Ctx) -> CheckResult:
    tau = calc.tension(_affine(ctx), MetricField.flat(ctx.grid))
    return _result("maps.affine_harmonic", np.max(np.abs(tau)), 1e-10)


@register("maps.rewrap_invariance")
def _rewrap(ctx: _Ctx) -> CheckResult:
    u = ctx.random_map(ctx.torus())
    k = ctx.rng.integers(-3, 4, size=u.disp.shape)
    v = u.with_disp(u.disp + k * u.target.periods)
    return _result("maps.rewrap_invariance", np.max(np.abs(calc.differential(u) - calc.differential(v))), 1e-10)


@register("maps.trace_free_identity")
def _trace_free(ctx: _Ctx) -> CheckResult:
    worst = math.inf
    for _ in range(ctx.cfg.samples):
        u    = ctx.random_map()
        hess = calc.hessian(u, ctx.metric)
        t    = calc.trace_tension(u, ctx.metric, hess)
        full = calc.two_form_dot(u, ctx.metric, hess, hess)
        gap  = full - 0.25 * calc.section_dot(u, t, t)
        worst = min(worst, float(np.min(gap / (1.0 + np.max(full)))))
    return _result("maps.trace_free_identity", worst, -1e-10, "min |Hess|^2 - |tau|^2/4", upper=False)


@register("maps.adjointness")
def _adjoint(ctx: _Ctx) -> CheckResult:
    u  = ctx.random_map()
    s  = ctx.random_section(u.target.n)
    om = np.stack([ctx.random_section(u.target.n) for _ in range(4)], axis=-2)
    return _result("maps.adjointness", calc.adjointness_defect(u, s, om, ctx.metric), ctx.cfg.adjoint_tol)


@register("maps.rough_laplacian_psd")
def _psd(ctx: _Ctx) -> CheckResult:
    u  = ctx.random_map()
    s  = ctx.random_section(u.target.n)
    q  = calc.l2(ctx.metric, calc.section_dot(u, calc.rough_laplacian(u, s, ctx.metric), s))
    n2 = calc.l2(ctx.metric, calc.section_dot(u, s, s))
    return _result("maps.rough_laplacian_psd", q / n2, -1e-10, "<Lap s, s>/|s|^2", upper=False)


@register("maps.linear_part_preserved")
def _class(ctx: _Ctx) -> CheckResult:
    u  = ctx.random_map(ctx.torus())
    st = step_explicit(FlowState(u), ctx.metric, cfl=0.4)
    changed = 0.0 if st.u.same_class(u) else 1.0
    return _result("maps.linear_part_preserved", changed, 0.0)


# --------------------------------------------------------------------------- #
#  energy                                                                     #
# --------------------------------------------------------------------------- #
@register("energy.flat_reduction")
def _flat_reduction(ctx: _Ctx) -> CheckResult:
    flat = MetricField.flat(ctx.grid)
    u    = ctx.random_map()
    F    = biharmonic_energy(u, flat)
    return _result("energy.flat_reduction", abs(conformal_energy(u, flat) - F) / (1.0 + F), 1e-12)


@register("energy.conformal_invariance")
def _energy_invariance(ctx: _Ctx) -> CheckResult:
    torus = ctx.torus()
    disp  = np.zeros(ctx.grid.dims + (torus.n,))
    disp[..., min(1, torus.n - 1)] = 0.1 * fourier_mode(ctx.grid, (1, 0, 0, 0))
    u     = MapField(ctx.grid, torus, ctx.linear_part(), disp)
    g     = ctx.metric
    g2    = conformal_metric(_wave_phi(ctx.grid)[0], g)
    gaps  = [abs(fn(u, g) - fn(u, g2)) / abs(fn(u, g)) for fn in (conformal_energy, total_energy)]
    return _result("energy.conformal_invariance", max(gaps), ctx.cfg.invariance_tol,
                   f"conformal {gaps[0]:.3e}, total {gaps[1]:.3e}")


@register("energy.comparison")
def _comparison(ctx: _Ctx) -> CheckResult:
    out = echecks.comparison_check(ctx.random_map(), ctx.metric)
    return CheckResult("energy.comparison", out["holds"], out["gap"], out["bound"], "|E - F| <= c |du|^2")


@register("energy.affine_critical")
def _affine_critical(ctx: _Ctx) -> CheckResult:
    L = c_harmonic_operator(_affine(ctx), MetricField.flat(ctx.grid))
    return _result("energy.affine_critical", np.max(np.abs(L)), 1e-10)


@register("energy.gradient_consistency")
def _gradient(ctx: _Ctx) -> CheckResult:
    worst = 0.0
    for _ in range(ctx.cfg.samples):
        u = ctx.random_map()
        v = ctx.random_section(u.target.n)
        worst = max(worst, echecks.gradient_check(u, ctx.metric, v, ctx.cfg.eps))
    return _result("energy.gradient_consistency", worst, ctx.cfg.gradient_tol)


@register("energy.bochner")
def _bochner(ctx: _Ctx) -> CheckResult:
    worst = max(echecks.bochner_residual(ctx.random_map(axes=(0,)), ctx.metric) for _ in range(ctx.cfg.samples))
    return _result("energy.bochner", worst, ctx.cfg.bochner_tol)


@register("energy.cutoff_bounds")
def _cutoff(ctx: _Ctx) -> CheckResult:
    R = min(0.5, min(ctx.grid.lengths) / 8.0)
    b1, b2 = cutoff_bounds(ctx.grid, (0, 0, 0, 0), R)
    return _result("energy.cutoff_bounds", max(b1, b2), CUTOFF_C, f"R={R:g}")


# --------------------------------------------------------------------------- #
#  flow / io                                                                  #
# --------------------------------------------------------------------------- #
@register("flow.fixed_point")
def _fixed_point(ctx: _Ctx) -> CheckResult:
    u  = _affine(ctx)
    st = step_explicit(FlowState(u), MetricField.flat(ctx.grid), cfl=0.4)
    return _result("flow.fixed_point", np.max(np.abs(st.u.disp - u.disp)), 0.0)


@register("flow.energy_decrease")
def _decrease(ctx: _Ctx) -> CheckResult:
    u  = ctx.random_map()
    e0 = conformal_energy(u, ctx.metric)
    st = step_explicit(FlowState(u), ctx.metric, cfl=0.4)
    e1 = conformal_energy(st.u, ctx.metric)
    eps = np.finfo(float).eps
    return _result("flow.energy_decrease", (e1 - e0) - 10.0 * eps * abs(e0), 0.0, "E(u') - E(u)")


@register("flow.energy_identity")
def _identity(ctx: _Ctx) -> CheckResult:
    cfg = {"method": "euler", "cfl": 0.4, "t_max": 1.0, "max_steps": IDENTITY_STEPS, "monitor_every": 5}
    res = run_flow(ctx.random_map(), ctx.metric, cfg)
    worst = max(r.identity_residual for r in res.state.history)
    if not res.monotone:
        worst = math.inf
    return _result("flow.energy_identity", worst, ctx.cfg.identity_tol,
                   f"{res.state.step} steps, monotone={res.monotone}")


@register("io.container_roundtrip")
def _roundtrip(ctx: _Ctx) -> CheckResult:
    f = Field(ctx.grid, "target", ctx.random_section(3, axes=None))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "f.cflow")
        write_field(path, f)
        back = read_field(path)
    same = back.values.tobytes() == f.values.tobytes() and back.grid == f.grid and back.rank == f.rank
    return _result("io.container_roundtrip", 0.0 if same else 1.0, 0.0)


# --------------------------------------------------------------------------- #
#  Runner                                                                     #
# --------------------------------------------------------------------------- #
def run_checks(client) -> List[CheckResult]:
    cfg  = client.config.check
    only = cfg.only
    if only:
        unknown = sorted(set(only) - set(CHECKS))
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; available: {sorted(CHECKS)}", field="check.only")

    results = []
    for index, (name, fn) in enumerate(CHECKS.items()):
        if only and name not in only:
            continue
        ctx = _Ctx(client=client, rng=np.random.default_rng([client.config.seed, index]))
        try:
            res = fn(ctx)
        except CFlowError as e:
            res = CheckResult(name, False, math.nan, math.nan, f"error: {e}")
        logger.info(res.row())
        results.append(res)
    return results
