"""
Pullback covariant calculus for a map u: (M,g) → (N,h).

Array layouts (node axes first, then):
    section          s[..., a]           sections of u*TN, chart components at u(x)
    one-form         ω[..., j, a]        u*TN-valued 1-forms, M-index before N-index
    two-form         A[..., i, j, a]     e.g. ∇̃du, derivative index first

Conventions:
    τ(u) = −tr_g ∇̃du     (positive for u = ε sin(2πx₀) on flat data)
    Δ̄    = ∇̄*∇̄           (positive)

``tension`` is evaluated in divergence form τ = ∇̄*du, which is −tr_g ∇̃du in the
continuum; ``trace_tension`` keeps the literal trace.  Coordinate frames replace the
orthonormal frame throughout, with g^{ij} doing the contractions.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np

from cflow.exceptions import FieldError
from cflow.geometry.metric import MetricField
from cflow.maps.map_field import MapField

logger = logging.getLogger(__name__)


def _check(u: MapField, metric: MetricField):
    if u.grid.dims != metric.grid.dims:
        raise FieldError(f"map lives on {u.grid.dims} but metric on {metric.grid.dims}")


def _target_points(u: MapField) -> np.ndarray:
    return u.points()


# --------------------------------------------------------------------------- #
#  du and the connections                                                     #
# --------------------------------------------------------------------------- #
def differential(u: MapField) -> np.ndarray:
    """(du)_i^a, layout [..., i, a]; linear part exact, displacement by central differences."""
    grid = u.grid
    if not u.is_torus:
        return grid.gradient(u.disp)

    out = np.empty(grid.dims + (4, u.target.n))
    for i in range(4):
        d = np.roll(u.disp, -1, axis=i) - np.roll(u.disp, 1, axis=i)
        out[..., i, :] = u.target.min_image(d) / (2.0 * grid.spacing[i]) + u.slope[:, i]
    return out


def connection_on_section(u: MapField, s: np.ndarray, metric: MetricField,
                          du: Optional[np.ndarray] = None) -> np.ndarray:
    """(∇̄_i s)^a = ∂_i s^a + Γ^N{}^a_{bc}(u) (du)_i^b s^c, layout [..., i, a]."""
    _check(u, metric)
    out = u.grid.gradient(s)
    if u.is_torus:
        return out
    du = differential(u) if du is None else du
    y  = _target_points(u)[..., None, :]
    return out + u.target.connection(y, du, s[..., None, :])


def pullback_derivative(u: MapField, omega: np.ndarray, metric: MetricField,
                        du: Optional[np.ndarray] = None) -> np.ndarray:
    """
    (∇̃_i ω)_j^a = ∂_i ω_j^a − Γ^M{}^k_{ij} ω_k^a + Γ^N{}^a_{bc}(u) (du)_i^b ω_j^c,
    layout [..., i, j, a].
    """
    _check(u, metric)
    out = u.grid.gradient(omega)
    if not metric.is_flat:
        out = out - np.einsum("...kij,...ka->...ija", metric.christoffel, omega)
    if not u.is_torus:
        du = differential(u) if du is None else du
        y  = _target_points(u)[..., None, None, :]
        out = out + u.target.connection(y, du[..., :, None, :], omega[..., None, :, :])
    return out


def adjoint_div(u: MapField, omega: np.ndarray, metric: MetricField,
                du: Optional[np.ndarray] = None) -> np.ndarray:
    """
    ∇̄*ω = −(1/√g) ∂_i(√g g^{ij} ω_j) − g^{ij} Γ^N(du_i, ω_j).

    Formal covariant divergence; for flat targets it is the exact discrete adjoint of
    ``connection_on_section`` in the ∫·dv_g pairing, otherwise up to O(h²).
    """
    _check(u, metric)
    grid = u.grid
    flux = np.einsum("...ij,...ja->...ia", metric.g_inv, omega) * metric.vol[..., None, None]
    div  = sum(grid.d1(flux[..., i, :], i) for i in range(4))
    out  = -div / metric.vol[..., None]
    if not u.is_torus:
        du  = differential(u) if du is None else du
        y   = _target_points(u)[..., None, None, :]
        gam = u.target.connection(y, du[..., :, None, :], omega[..., None, :, :])
        out = out - np.einsum("...ij,...ija->...a", metric.g_inv, gam)
    return out


def rough_laplacian(u: MapField, s: np.ndarray, metric: MetricField,
                    du: Optional[np.ndarray] = None) -> np.ndarray:
    """Δ̄s = ∇̄*∇̄s."""
    du = differential(u) if du is None else du
    return adjoint_div(u, connection_on_section(u, s, metric, du), metric, du)


# --------------------------------------------------------------------------- #
#  Second fundamental form and tension                                        #
# --------------------------------------------------------------------------- #
def tension(u: MapField, metric: MetricField, du: Optional[np.ndarray] = None) -> np.ndarray:
    """τ(u) = ∇̄*du (divergence form of −tr_g ∇̃du)."""
    du = differential(u) if du is None else du
    return adjoint_div(u, du, metric, du)


def hessian(u: MapField, metric: MetricField, du: Optional[np.ndarray] = None) -> np.ndarray:
    """∇̃du, layout [..., i, j, a]."""
    du = differential(u) if du is None else du
    return pullback_derivative(u, du, metric, du)


def trace_tension(u: MapField, metric: MetricField,
                  hess: Optional[np.ndarray] = None) -> np.ndarray:
    """−g^{ij}(∇̃du)_{ij}, the literal trace."""
    hess = hessian(u, metric) if hess is None else hess
    return -np.einsum("...ij,...ija->...a", metric.g_inv, hess)


def trace_free_hessian(u: MapField, metric: MetricField,
                       hess: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    ∇̃₀du = ∇̃du + ¼ g ⊗ τ_tr and its pointwise squared norm.

    The norm satisfies |∇̃₀du|² = |∇̃du|² − ¼|τ_tr|² algebraically.
    """
    hess = hessian(u, metric) if hess is None else hess
    t    = trace_tension(u, metric, hess)
    a0   = hess + 0.25 * metric.g[..., None] * t[..., None, None, :]
    return a0, two_form_dot(u, metric, a0, a0)


# --------------------------------------------------------------------------- #
#  Pointwise pairings and L² products                                         #
# --------------------------------------------------------------------------- #
def section_dot(u: MapField, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """⟨s,t⟩_h per node."""
    return u.target.inner(_target_points(u), s, t)


def form_dot(u: MapField, metric: MetricField, omega: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """g^{ij}⟨ω_i, η_j⟩_h per node."""
    lam = u.target.conformal_factor(_target_points(u))
    return lam * np.einsum("...ij,...ia,...ja->...", metric.g_inv, omega, eta)


def two_form_dot(u: MapField, metric: MetricField, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """g^{ik} g^{jl} ⟨A_ij, B_kl⟩_h per node."""
    lam = u.target.conformal_factor(_target_points(u))
    gi  = metric.g_inv
    return lam * np.einsum("...ik,...jl,...ija,...kla->...", gi, gi, a, b, optimize=True)


def pairing_matrix(u: MapField, du: np.ndarray) -> np.ndarray:
    """P_ij = ⟨du_i, du_j⟩_h, layout [..., i, j]."""
    lam = u.target.conformal_factor(_target_points(u))
    return lam[..., None, None] * np.einsum("...ia,...ja->...ij", du, du)


def l2(metric: MetricField, density: np.ndarray) -> float:
    return metric.grid.integrate(density, metric.vol)


def adjointness_defect(u: MapField, s: np.ndarray, omega: np.ndarray,
                       metric: MetricField) -> float:
    """|⟨∇̄s, ω⟩ − ⟨s, ∇̄*ω⟩| relative to ‖∇̄s‖·‖ω‖."""
    du   = differential(u)
    ds   = connection_on_section(u, s, metric, du)
    divw = adjoint_div(u, omega, metric, du)
    lhs  = l2(metric, form_dot(u, metric, ds, omega))
    rhs  = l2(metric, section_dot(u, s, divw))
    scale = np.sqrt(l2(metric, form_dot(u, metric, ds, ds)) * l2(metric, form_dot(u, metric, omega, omega)))
    defect = abs(lhs - rhs) / (scale + 1e-30)
    logger.debug(f"adjointness defect {defect:.3e} (lhs={lhs:.6e}, rhs={rhs:.6e})")
    return float(defect)
