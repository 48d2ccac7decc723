"""
Euler–Lagrange operators.

    𝓛(u) = Δ̄τ + Σ R^N(du(e_i), τ) du(e_i) + ∇̄*(B du)      (critical points of ℰ)
    biharmonic:  Δ̄τ + Σ R^N(du(e_i), τ) du(e_i)             (critical points of 𝓕)

with B_j{}^k = ⅔S δ_j^k − 2Ric_j{}^k acting on the M-index of du.  With these signs
dℰ(V) = 2⟨𝓛(u), V⟩ and d𝓕(V) = 2⟨biharmonic(u), V⟩, ⟨s,t⟩ = ∫⟨s,t⟩_h dv_g.
"""

from __future__ import annotations

import logging
from typing import Dict, Optional

import numpy as np

from cflow.energy.functional import coupling_tensor
from cflow.geometry.metric import MetricField
from cflow.maps import calculus as calc
from cflow.maps.map_field import MapField

logger = logging.getLogger(__name__)


def curvature_term(u: MapField, tau: np.ndarray, du: np.ndarray, metric: MetricField) -> np.ndarray:
    """
    g^{ij} R^N(du_i, τ) du_j for a space form:
    K g^{ij}(⟨τ, du_j⟩_h du_i − ⟨du_i, du_j⟩_h τ).
    """
    K = u.target.K
    if K == 0.0:
        return np.zeros_like(tau)
    lam  = u.target.conformal_factor(u.points())
    gi   = metric.g_inv
    t_du = lam[..., None] * np.einsum("...a,...ja->...j", tau, du)        # ⟨τ, du_j⟩
    P    = calc.pairing_matrix(u, du)
    first  = np.einsum("...ij,...j,...ia->...a", gi, t_du, du)
    second = np.einsum("...ij,...ij->...", gi, P)[..., None] * tau
    return K * (first - second)


def c_harmonic_terms(u: MapField, metric: MetricField) -> Dict[str, np.ndarray]:
    """The three pieces of 𝓛(u): rough, curvature and coupling."""
    du  = calc.differential(u)
    tau = calc.tension(u, metric, du)
    out = {
        "rough":     calc.rough_laplacian(u, tau, metric, du),
        "curvature": curvature_term(u, tau, du, metric),
    }
    if metric.is_flat:
        out["coupling"] = np.zeros_like(tau)
    else:
        # (B du)_j = B_j^k du_k with B_j^k = g_jl B^{lk}
        B_mixed = np.einsum("...jl,...lk->...jk", metric.g, coupling_tensor(metric))
        out["coupling"] = calc.adjoint_div(u, np.einsum("...jk,...ka->...ja", B_mixed, du), metric, du)
    return out


def c_harmonic_operator(u: MapField, metric: MetricField) -> np.ndarray:
    terms = c_harmonic_terms(u, metric)
    return terms["rough"] + terms["curvature"] + terms["coupling"]


def biharmonic_operator(u: MapField, metric: MetricField) -> np.ndarray:
    du  = calc.differential(u)
    tau = calc.tension(u, metric, du)
    return calc.rough_laplacian(u, tau, metric, du) + curvature_term(u, tau, du, metric)


OPERATORS = {
    "conformal":  c_harmonic_operator,
    "biharmonic": biharmonic_operator,
}


def operator_for(functional: Optional[str]):
    name = functional or "conformal"
    if name not in OPERATORS:
        raise ValueError(f"unknown functional '{name}', expected one of {sorted(OPERATORS)}")
    return OPERATORS[name]
