import numpy as np
import pytest

from cflow.exceptions import GeometryError
from cflow.geometry.curvature import (bianchi_defect, christoffels, hypothesis_report, q_total,
                                      ricci_margin, yamabe_quotient)
from cflow.geometry.metric import PHI_CAP, MetricField, conformal_metric
from cflow.grid.lattice import Grid4


def _phi_mode(grid, amp=0.15):
    return amp * np.sin(2 * np.pi * grid.coordinate(0)) * np.ones(grid.dims)


def _phi_two_axes(grid, amp=0.15):
    x0, x1 = grid.coordinate(0), grid.coordinate(1)
    return amp * np.sin(2 * np.pi * x0) * np.sin(2 * np.pi * x1) * np.ones(grid.dims)


# --------------------------------------------------------------------------- #
#  MetricField / conformal_metric                                             #
# --------------------------------------------------------------------------- #
def test_metric_validation():
    grid = Grid4((8, 8, 8, 8))
    g = np.broadcast_to(np.eye(4), grid.dims + (4, 4)).copy()
    g[0, 0, 0, 0, 2, 2] = -1.0
    with pytest.raises(GeometryError):
        MetricField(grid, g)
    with pytest.raises(GeometryError):
        MetricField(grid, np.zeros(grid.dims + (3, 3)))


def test_conformal_metric_examples():
    grid = Grid4((8, 8, 8, 8))
    flat = MetricField.flat(grid)

    same = conformal_metric(np.zeros(grid.dims), flat)
    assert np.array_equal(same.g, flat.g)

    c = 0.2
    scaled = conformal_metric(np.full(grid.dims, c), flat)
    assert np.allclose(scaled.vol, np.exp(4 * c), rtol=1e-14)

    wavy = conformal_metric(_phi_mode(grid, 0.2), flat)
    assert np.all(np.linalg.eigvalsh(wavy.g) > 0)
    assert np.max(np.abs(wavy.g @ wavy.g_inv - np.eye(4))) <= 1e-12


def test_conformal_metric_cap():
    grid = Grid4((8, 8, 8, 8))
    with pytest.raises(GeometryError):
        conformal_metric(np.full(grid.dims, PHI_CAP + 1.0), MetricField.flat(grid))
    with pytest.raises(GeometryError):
        conformal_metric(np.zeros((8, 8, 8)), MetricField.flat(grid))


# --------------------------------------------------------------------------- #
#  Christoffels                                                               #
# --------------------------------------------------------------------------- #
def test_flat_metric_has_no_curvature():
    grid = Grid4((8, 8, 8, 8))
    for m in (MetricField.flat(grid), MetricField.flat(grid, [1.0, 2.0, 0.5, 3.0])):
        cb = m.curvature
        assert np.max(np.abs(cb.gamma)) == 0.0
        assert np.max(np.abs(cb.riem)) == 0.0
        assert np.max(np.abs(cb.scal)) == 0.0
        assert q_total(m) == 0.0
        assert yamabe_quotient(m) == 0.0


def _conformal_christoffel_error(n):
    grid = Grid4((n, n, 8, 8))
    phi  = _phi_two_axes(grid)
    m    = MetricField.conformally_flat(grid, phi)
    dphi = np.zeros(grid.dims + (4,))
    x0, x1 = grid.coordinate(0), grid.coordinate(1)
    dphi[..., 0] = 0.15 * 2 * np.pi * np.cos(2 * np.pi * x0) * np.sin(2 * np.pi * x1)
    dphi[..., 1] = 0.15 * 2 * np.pi * np.sin(2 * np.pi * x0) * np.cos(2 * np.pi * x1)
    eye = np.eye(4)
    exact = (eye[:, :, None] * dphi[..., None, None, :]
             + eye[:, None, :] * dphi[..., None, :, None]
             - eye[None, :, :] * dphi[..., :, None, None])
    return np.max(np.abs(christoffels(m) - exact))


def test_conformal_christoffels_second_order():
    e16 = _conformal_christoffel_error(16)
    e32 = _conformal_christoffel_error(32)
    assert e16 < 0.1
    assert e16 / e32 >= 3.5


def test_product_metric_christoffels():
    grid = Grid4((16, 8, 8, 8))
    g = np.broadcast_to(np.eye(4), grid.dims + (4, 4)).copy()
    g[..., 0, 0] = (1.0 + 0.3 * np.sin(2 * np.pi * grid.coordinate(0))) * np.ones(grid.dims)
    gamma = christoffels(MetricField(grid, g))

    mask = np.zeros((4, 4, 4), dtype=bool)
    mask[0, 0, 0] = True
    assert np.max(np.abs(gamma[..., ~mask])) == 0.0
    assert np.max(np.abs(gamma[..., 0, 0, 0])) > 0.1
    assert np.array_equal(gamma, np.swapaxes(gamma, -1, -2))


# --------------------------------------------------------------------------- #
#  Curvature                                                                  #
# --------------------------------------------------------------------------- #
def test_round_sphere_chart_has_scalar_curvature_twelve():
    # setup: φ = log(2/(1+|x|²)) on a patch centred at the origin
    # -------------------------------------------------------------------------
    L    = 0.375
    grid = Grid4((12, 12, 12, 12), (L, L, L, L))
    r2   = sum((grid.coordinate(a) - L / 2) ** 2 for a in range(4))
    phi  = np.log(2.0 / (1.0 + r2))
    m    = MetricField.conformally_flat(grid, phi)

    # interior nodes only: the chart is not periodic
    # -------------------------------------------------------------------------
    inner = m.curvature.scal[3:-3, 3:-3, 3:-3, 3:-3]
    assert np.max(np.abs(inner - 12.0)) < 0.25


def test_curvature_algebraic_identities():
    grid = Grid4((12, 12, 8, 8))
    m = MetricField.conformally_flat(grid, _phi_two_axes(grid))
    cb = m.curvature

    tr = np.trace(cb.ric_mixed(m), axis1=-2, axis2=-1)
    assert np.max(np.abs(cb.scal - tr)) <= 1e-12 * (1 + np.max(np.abs(cb.scal)))
    assert np.max(np.abs(cb.riem + np.swapaxes(cb.riem, -1, -2))) <= 1e-12 * (1 + np.max(np.abs(cb.riem)))
    assert np.array_equal(cb.ric, np.swapaxes(cb.ric, -1, -2))


def test_constant_scaling_is_flat():
    grid = Grid4((8, 8, 8, 8))
    m = conformal_metric(np.full(grid.dims, 0.7), MetricField.flat(grid))
    assert np.max(np.abs(m.curvature.riem)) <= 1e-10
    assert abs(yamabe_quotient(m)) <= 1e-10


# --------------------------------------------------------------------------- #
#  Conformal invariants                                                       #
# --------------------------------------------------------------------------- #
def test_q_total_conformal_invariance_converges():
    # φ varies along x0, x1 only; the gap is measured against the size of ∫S²dv/12
    rel = {}
    for n in (16, 24, 32):
        grid = Grid4((n, n, 8, 8))
        m = MetricField.conformally_flat(grid, _phi_two_axes(grid))
        scale = grid.integrate(m.curvature.scal ** 2, m.vol) / 12.0
        rel[n] = abs(q_total(m) - q_total(MetricField.flat(grid))) / (1.0 + scale)
    assert rel[16] < 0.1
    assert rel[16] > rel[24] > rel[32]
    assert np.log(rel[24] / rel[32]) / np.log(32 / 24) >= 1.5


def test_yamabe_quotient_matches_closed_form():
    # S of e^{2φ}δ is −6 e^{−2φ}(Δφ + |∇φ|²)
    grid = Grid4((32, 8, 8, 8))
    x    = grid.coordinate(0)
    k    = 2 * np.pi
    phi  = 0.15 * np.sin(k * x) * np.ones(grid.dims)
    d1   = 0.15 * k * np.cos(k * x)
    d2   = -0.15 * k ** 2 * np.sin(k * x)
    scal = -6 * np.exp(-2 * phi) * (d2 + d1 ** 2)
    vol  = np.exp(4 * phi)
    one  = np.ones(grid.dims)
    exact = grid.integrate(scal * one, vol) / np.sqrt(grid.integrate(one, vol))

    got = yamabe_quotient(MetricField.conformally_flat(grid, phi))
    assert got == pytest.approx(exact, rel=5e-2)


def test_bianchi_defect_decreases():
    defects = []
    for n in (16, 32):
        grid = Grid4((n, 8, 8, 8))
        defects.append(bianchi_defect(MetricField.conformally_flat(grid, _phi_mode(grid))))
    assert defects[0] / defects[1] >= 2.8


def test_hypothesis_report_flat_and_conformal():
    grid = Grid4((8, 8, 8, 8))
    rep = hypothesis_report(MetricField.flat(grid))
    assert rep["kappa"] == 0.0
    assert rep["yamabe_quotient"] == 0.0
    assert rep["scalar_min"] == rep["scalar_max"] == 0.0

    grid = Grid4((16, 8, 8, 8))
    m = MetricField.conformally_flat(grid, _phi_mode(grid))
    rep = hypothesis_report(m)
    assert set(rep) >= {"kappa", "yamabe_quotient", "kappa_plus_quotient", "ricci_margin"}
    assert rep["kappa_plus_quotient"] == pytest.approx(rep["kappa"] + rep["yamabe_quotient"] ** 2 / 6)
    assert rep["ricci_margin"] == ricci_margin(m)
