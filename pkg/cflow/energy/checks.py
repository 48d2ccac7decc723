"""
Structural residuals: gradient consistency, the Bochner–Weitzenböck identity,
coercivity samples and the ℰ/𝓕 comparison.
"""

from __future__ import annotations

import logging
from typing import Dict, Tuple

import numpy as np

from cflow.energy.functional import ENERGIES, comparison_constant, energy_densities
from cflow.energy.operator import operator_for
from cflow.exceptions import FieldError
from cflow.geometry.metric import MetricField
from cflow.maps import calculus as calc
from cflow.maps.map_field import MapField

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------- #
#  Gradient consistency                                                       #
# --------------------------------------------------------------------------- #
def gradient_sides(u: MapField, metric: MetricField, v: np.ndarray, eps: float,
                   functional: str = "conformal") -> Tuple[float, float]:
    """(ℰ(u+εv) − ℰ(u−εv))/(2ε) and 2⟨𝓛(u), v⟩."""
    if not eps > 0:
        raise FieldError(f"eps must be positive, got {eps}")
    energy = ENERGIES[functional]
    op     = operator_for(functional)
    fd     = (energy(u.perturbed(v, eps), metric) - energy(u.perturbed(v, -eps), metric)) / (2.0 * eps)
    pred   = 2.0 * calc.l2(metric, calc.section_dot(u, op(u, metric), v))
    return float(fd), float(pred)


def gradient_check(u: MapField, metric: MetricField, v: np.ndarray, eps: float = 1e-4,
                   functional: str = "conformal") -> float:
    """|fd − 2⟨𝓛(u),v⟩| / (|2⟨𝓛(u),v⟩| + 1e-30)."""
    fd, pred = gradient_sides(u, metric, v, eps, functional)
    rel = abs(fd - pred) / (abs(pred) + 1e-30)
    logger.debug(f"gradient check eps={eps:.1e}: fd={fd:.10e} pred={pred:.10e} rel={rel:.3e}")
    return rel


# --------------------------------------------------------------------------- #
#  Bochner–Weitzenböck                                                        #
# --------------------------------------------------------------------------- #
def target_curvature_density(u: MapField, metric: MetricField, du: np.ndarray) -> np.ndarray:
    """Σ_ij ⟨R^N(du(e_i),du(e_j))du(e_j), du(e_i)⟩ = K((tr M)² − tr M²), M = g^{-1}P."""
    if u.target.K == 0.0:
        return np.zeros(u.grid.dims)
    M = np.einsum("...ik,...kj->...ij", metric.g_inv, calc.pairing_matrix(u, du))
    tr = np.einsum("...ii->...", M)
    return u.target.K * (tr ** 2 - np.einsum("...ij,...ji->...", M, M))


def bochner_sides(u: MapField, metric: MetricField) -> Tuple[float, float]:
    """‖τ‖² and ‖∇̃du‖² − ∫(Σ⟨R^N(du_i,du_j)du_j,du_i⟩ − Ric(du,du)) dv."""
    du   = calc.differential(u)
    tau  = calc.tension(u, metric, du)
    hess = calc.hessian(u, metric, du)
    lhs  = calc.l2(metric, calc.section_dot(u, tau, tau))

    density = calc.two_form_dot(u, metric, hess, hess) - target_curvature_density(u, metric, du)
    if not metric.is_flat:
        ric_up  = metric.curvature.ric_up(metric)
        density = density + np.einsum("...ij,...ij->...", ric_up, calc.pairing_matrix(u, du))
    return lhs, calc.l2(metric, density)


def bochner_residual(u: MapField, metric: MetricField) -> float:
    lhs, rhs = bochner_sides(u, metric)
    res = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30)
    logger.debug(f"bochner: |tau|^2={lhs:.10e} rhs={rhs:.10e} residual={res:.3e}")
    return res


# --------------------------------------------------------------------------- #
#  Coercivity / comparison                                                    #
# --------------------------------------------------------------------------- #
def coercivity_ratio(u: MapField, metric: MetricField) -> float:
    """ℰ(u)/‖du‖₂², a sample of the constant in ℰ ≥ c‖du‖²."""
    d = energy_densities(u, metric, with_hessian=False)
    dirichlet = calc.l2(metric, d["dirichlet"])
    if dirichlet <= 0.0:
        raise FieldError("coercivity ratio undefined for a constant map (‖du‖ = 0)")
    return calc.l2(metric, d["conformal"]) / dirichlet


def comparison_check(u: MapField, metric: MetricField) -> Dict[str, float]:
    """|ℰ − 𝓕| against c‖du‖², c from ``comparison_constant``."""
    d = energy_densities(u, metric, with_hessian=False)
    gap   = abs(calc.l2(metric, d["coupling"]))
    bound = comparison_constant(metric) * calc.l2(metric, d["dirichlet"])
    return {"gap": gap, "bound": bound, "holds": bool(gap <= bound + 1e-12 * (1.0 + bound))}
