"""
Finite-difference Christoffel symbols, curvature tensors and the conformal invariants.

Sign convention (fixed so the round S⁴ chart has S = +12):

    R^k_{lij} = ∂_iΓ^k_{jl} − ∂_jΓ^k_{il} + Γ^k_{im}Γ^m_{jl} − Γ^k_{jm}Γ^m_{il}
    Ric_{lj}  = R^i_{lij}            S = g^{lj} Ric_{lj}

i.e. R(∂_i,∂_j)∂_l = R^k_{lij}∂_k with R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y].
Array layouts: gamma[..., k, i, j] = Γ^k_{ij}, riem[..., k, l, i, j] = R^k_{lij}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from cflow.geometry.metric import MetricField

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    gamma: np.ndarray
    riem:  np.ndarray
    ric:   np.ndarray
    scal:  np.ndarray

    def ric_mixed(self, metric: MetricField) -> np.ndarray:
        """Ric^i_j = g^{ik} Ric_kj."""
        return metric.raise_index(self.ric)

    def ric_up(self, metric: MetricField) -> np.ndarray:
        """Ric^{ij} = g^{ik} g^{jl} Ric_kl."""
        return np.einsum("...ik,...jl,...kl->...ij", metric.g_inv, metric.g_inv, self.ric)

    def ric_norm2(self, metric: MetricField) -> np.ndarray:
        return np.einsum("...ij,...ij->...", self.ric_up(metric), self.ric)


# --------------------------------------------------------------------------- #
#  Christoffels / curvature                                                   #
# --------------------------------------------------------------------------- #
def christoffels(metric: MetricField) -> np.ndarray:
    """Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})."""
    dg = metric.grid.gradient(metric.g)                      # dg[..., i, j, l] = ∂_i g_jl
    t  = dg + np.swapaxes(dg, 4, 5) - np.transpose(dg, (0, 1, 2, 3, 5, 6, 4))
    return 0.5 * np.einsum("...kl,...ijl->...kij", metric.g_inv, t)


def curvature(metric: MetricField) -> CurvatureBundle:
    """Γ, then Riemann, then the contractions; each stage reads only the previous one."""
    gamma = metric.christoffel
    dgam  = metric.grid.gradient(gamma)                      # dgam[..., m, k, i, j] = ∂_m Γ^k_ij

    a    = np.einsum("...ikjl->...klij", dgam)               # ∂_i Γ^k_{jl}
    quad = np.einsum("...kim,...mjl->...klij", gamma, gamma)  # Γ^k_{im} Γ^m_{jl}
    riem = (a - np.swapaxes(a, -1, -2)) + (quad - np.swapaxes(quad, -1, -2))

    ric  = np.einsum("...ilij->...lj", riem)
    ric  = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    scal = np.einsum("...lj,...lj->...", metric.g_inv, ric)

    logger.debug(f"curvature on {metric.grid.dims}: S in [{scal.min():.4g}, {scal.max():.4g}]")
    return CurvatureBundle(gamma=gamma, riem=riem, ric=ric, scal=scal)


# --------------------------------------------------------------------------- #
#  Conformal invariants                                                       #
# --------------------------------------------------------------------------- #
def q_total(metric: MetricField) -> float:
    """κ = (1/12)∫(S² − 3|Ric|²) dv_g, |Ric|² with both indices raised by g."""
    cb = metric.curvature
    density = (cb.scal ** 2 - 3.0 * cb.ric_norm2(metric)) / 12.0
    return metric.grid.integrate(density, metric.vol)


def yamabe_quotient(metric: MetricField) -> float:
    """∫S dv / (∫dv)^{1/2} for this metric only: an upper bound for μ(M,[g])."""
    cb = metric.curvature
    return metric.grid.integrate(cb.scal, metric.vol) / np.sqrt(metric.volume())


# --------------------------------------------------------------------------- #
#  Diagnostics                                                                #
# --------------------------------------------------------------------------- #
def bianchi_defect(metric: MetricField) -> float:
    """max over nodes of |g^{ij}∇_i Ric_{jk} − ½∂_k S| (Euclidean norm over k)."""
    cb   = metric.curvature
    grid = metric.grid
    d_ric = grid.gradient(cb.ric)                            # [..., i, j, k]
    cov   = (d_ric
             - np.einsum("...mij,...mk->...ijk", cb.gamma, cb.ric)
             - np.einsum("...mik,...jm->...ijk", cb.gamma, cb.ric))
    div   = np.einsum("...ij,...ijk->...k", metric.g_inv, cov)
    defect = div - 0.5 * grid.gradient(cb.scal)
    return float(np.max(np.linalg.norm(defect, axis=-1)))


def ricci_eigenvalues(metric: MetricField) -> np.ndarray:
    """Eigenvalues of Ric relative to g at each node, ascending."""
    # g^{-1/2} Ric g^{-1/2} is symmetric and similar to Ric^i_j
    w, v  = np.linalg.eigh(metric.g)
    isqrt = np.einsum("...ik,...k,...jk->...ij", v, 1.0 / np.sqrt(w), v)
    sym   = isqrt @ metric.curvature.ric @ isqrt
    return np.linalg.eigvalsh(0.5 * (sym + np.swapaxes(sym, -1, -2)))


def ricci_operator_norm(metric: MetricField) -> np.ndarray:
    return np.max(np.abs(ricci_eigenvalues(metric)), axis=-1)


def ricci_margin(metric: MetricField) -> float:
    """min over nodes of the smallest eigenvalue of S·g − Ric; positive iff Ric < S g."""
    eig = ricci_eigenvalues(metric)
    return float(np.min(metric.curvature.scal - eig[..., -1]))


def hypothesis_report(metric: MetricField) -> Dict[str, float]:
    """
    Numbers behind the sign hypotheses on (M,[g]).

    The quotient only bounds μ from above, so ``kappa_plus_quotient`` is a screening
    number: non-positive with a positive quotient rules the hypothesis out for this
    class; positive is inconclusive.
    """
    kappa = q_total(metric)
    quot  = yamabe_quotient(metric)
    scal  = metric.curvature.scal
    return {
        "kappa":               kappa,
        "yamabe_quotient":     quot,
        "kappa_plus_quotient": kappa + quot ** 2 / 6.0,
        "ricci_margin":        ricci_margin(metric),
        "scalar_min":          float(np.min(scal)),
        "scalar_max":          float(np.max(scal)),
    }
