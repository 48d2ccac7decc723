"""
Energies of a map u: (M,g) → (N,h).

    ℰ(u) = ∫ |τ|² + ⅔S|du|² − 2Ric(du,du) dv_g         conformal energy
    𝓕(u) = ∫ |τ|² dv_g                                   biharmonic energy
    E(u) = ℰ(u) + (∫ |du|⁴ dv_g)^{1/2}                   total energy

with |du|² = g^{ij}⟨du_i,du_j⟩_h, Ric(du,du) = Ric^{ij}⟨du_i,du_j⟩_h and
|du|⁴ = (|du|²)².  Local energies weight the same densities with a cutoff η.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from cflow.exceptions import FieldError
from cflow.geometry.curvature import ricci_operator_norm
from cflow.geometry.metric import MetricField
from cflow.grid.lattice import Grid4
from cflow.maps import calculus as calc
from cflow.maps.map_field import MapField

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyReport:
    conformal:  float
    biharmonic: float
    dirichlet:  float
    quartic:    float
    total:      float
    hessian:    float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def coupling_tensor(metric: MetricField) -> np.ndarray:
    """B^{ij} = ⅔S g^{ij} − 2Ric^{ij}, so that ℰ − 𝓕 = ∫ B^{ij}⟨du_i,du_j⟩_h dv."""
    if metric.is_flat:
        return np.zeros(metric.grid.dims + (4, 4))
    cb = metric.curvature
    return (2.0 / 3.0) * cb.scal[..., None, None] * metric.g_inv - 2.0 * cb.ric_up(metric)


# --------------------------------------------------------------------------- #
#  Densities                                                                  #
# --------------------------------------------------------------------------- #
def energy_densities(u: MapField, metric: MetricField,
                     with_hessian: bool = True) -> Dict[str, np.ndarray]:
    """Pointwise integrands (without dv_g) of every energy in EnergyReport."""
    du   = calc.differential(u)
    tau  = calc.tension(u, metric, du)
    P    = calc.pairing_matrix(u, du)

    tension2  = calc.section_dot(u, tau, tau)
    dirichlet = np.einsum("...ij,...ij->...", metric.g_inv, P)
    coupling  = np.einsum("...ij,...ij->...", coupling_tensor(metric), P)
    out = {
        "tension":   tension2,
        "dirichlet": dirichlet,
        "coupling":  coupling,
        "conformal": tension2 + coupling,
        "quartic":   dirichlet ** 2,
    }
    if with_hessian:
        hess = calc.hessian(u, metric, du)
        out["hessian"] = calc.two_form_dot(u, metric, hess, hess)
    return out


# --------------------------------------------------------------------------- #
#  Global energies                                                            #
# --------------------------------------------------------------------------- #
def conformal_energy(u: MapField, metric: MetricField) -> float:
    d = energy_densities(u, metric, with_hessian=False)
    return calc.l2(metric, d["conformal"])


def biharmonic_energy(u: MapField, metric: MetricField) -> float:
    tau = calc.tension(u, metric)
    return calc.l2(metric, calc.section_dot(u, tau, tau))


def total_energy(u: MapField, metric: MetricField) -> float:
    d = energy_densities(u, metric, with_hessian=False)
    return calc.l2(metric, d["conformal"]) + np.sqrt(calc.l2(metric, d["quartic"]))


def energy_report(u: MapField, metric: MetricField) -> EnergyReport:
    d = {k: calc.l2(metric, v) for k, v in energy_densities(u, metric).items()}
    return EnergyReport(
        conformal  = d["conformal"],
        biharmonic = d["tension"],
        dirichlet  = d["dirichlet"],
        quartic    = d["quartic"],
        total      = d["conformal"] + float(np.sqrt(d["quartic"])),
        hessian    = d["hessian"],
    )


ENERGIES = {
    "conformal":  conformal_energy,
    "biharmonic": biharmonic_energy,
}


def comparison_constant(metric: MetricField) -> float:
    """2·max over nodes of (|⅔S| + 2|Ric|_op), the constant in |ℰ − 𝓕| ≤ c‖du‖²."""
    if metric.is_flat:
        return 0.0
    scal = metric.curvature.scal
    return float(2.0 * np.max(np.abs(2.0 * scal / 3.0) + 2.0 * ricci_operator_norm(metric)))


# --------------------------------------------------------------------------- #
#  Cutoff and local energy                                                    #
# --------------------------------------------------------------------------- #
def _check_radius(grid: Grid4, R: float):
    if not R > 0:
        raise FieldError(f"cutoff radius must be positive, got R={R}")
    if R >= 1.0:
        raise FieldError(f"cutoff radius must be < 1, got R={R}")
    if 2.0 * R >= 0.5 * min(grid.lengths):
        raise FieldError(f"2R = {2 * R} must stay below half the shortest period {0.5 * min(grid.lengths)}")


def cutoff(grid: Grid4, center: Sequence[int], R: float) -> np.ndarray:
    """η = 1 on B_R, (1 − s²)² with s = (r − R)/R on B_2R \\ B_R, 0 outside."""
    _check_radius(grid, R)
    r = grid.torus_distance(tuple(int(c) for c in center))
    s = np.clip((r - R) / R, 0.0, 1.0)
    return (1.0 - s ** 2) ** 2


def cutoff_bounds(grid: Grid4, center: Sequence[int], R: float) -> Tuple[float, float]:
    """max |Dη| · R² and max |D²η| · R⁴ (Frobenius over the D∘D Hessian)."""
    eta  = cutoff(grid, center, R)
    grad = grid.gradient(eta)
    hess = grid.gradient(grad)
    g1 = float(np.max(np.linalg.norm(grad, axis=-1)))
    g2 = float(np.max(np.sqrt(np.sum(hess ** 2, axis=(-2, -1)))))
    return g1 * R ** 2, g2 * R ** 4


def local_energy(u: MapField, metric: MetricField, center: Sequence[int], R: float,
                 densities: Optional[Dict[str, np.ndarray]] = None) -> float:
    """∫ η ℰ-density dv + (∫ η |du|⁴ dv)^{1/2} around the node ``center``."""
    eta = cutoff(u.grid, center, R)
    d   = energy_densities(u, metric, with_hessian=False) if densities is None else densities
    return calc.l2(metric, eta * d["conformal"]) + float(np.sqrt(max(calc.l2(metric, eta * d["quartic"]), 0.0)))


@dataclass(frozen=True)
class LocalEnergyProfile:
    centers: np.ndarray          # [m, 4] node indices
    values:  np.ndarray          # [m]
    radius:  float

    @property
    def peak_center(self) -> Tuple[int, ...]:
        return tuple(int(c) for c in self.centers[int(np.argmax(self.values))])

    @property
    def peak_value(self) -> float:
        return float(np.max(self.values))

    def to_dict(self) -> Dict:
        return {"radius": self.radius, "peak_center": list(self.peak_center),
                "peak_value": self.peak_value, "sum": float(np.sum(self.values))}


def local_energy_profile(u: MapField, metric: MetricField, R: float, stride: int = 2) -> LocalEnergyProfile:
    """Local energies on the sub-lattice of centres every ``stride`` nodes."""
    grid = u.grid
    _check_radius(grid, R)
    if stride < 1:
        raise FieldError(f"stride must be >= 1, got {stride}")
    d = energy_densities(u, metric, with_hessian=False)
    w_conf  = (d["conformal"] * metric.vol * grid.cell_volume).ravel()
    w_quart = (d["quartic"] * metric.vol * grid.cell_volume).ravel()

    axes    = [np.arange(0, n, stride) for n in grid.dims]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
    # η depends on the offset only, so each centre is one rolled copy of a template
    template = cutoff(grid, (0, 0, 0, 0), R)
    conf  = np.empty(len(centers))
    quart = np.empty(len(centers))
    for m, c in enumerate(centers):
        eta = np.roll(template, shift=tuple(int(v) for v in c), axis=(0, 1, 2, 3)).ravel()
        conf[m]  = eta @ w_conf
        quart[m] = eta @ w_quart
    values = conf + np.sqrt(np.maximum(quart, 0.0))
    logger.debug(f"local energy profile: {len(centers)} centres, peak {values.max():.4e}")
    return LocalEnergyProfile(centers=centers, values=values, radius=float(R))
