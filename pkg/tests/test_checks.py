import math

import pytest

from cflow.checks import suite
from cflow.checks.suite import CHECKS, run_checks
from cflow.client import CFlowClient
from cflow.configs.base import config_from_dict
from cflow.exceptions import ConfigError, FieldError


def _client(**overrides):
    data = {
        "grid":        {"dims": [8, 8, 8, 8]},
        "target":      {"kind": "torus", "dim": 2},
        "initial_map": {"kind": "affine", "linear_part": [[1, 0, 0, 0], [0, 1, 0, 0]]},
    }
    data.update(overrides)
    return CFlowClient(config_from_dict(data))


def test_full_suite_passes_on_flat_torus():
    results = run_checks(_client())
    assert [r.name for r in results] == list(CHECKS)
    failed = [r.row() for r in results if not r.passed]
    assert failed == []


def test_ball_target_checks():
    names = ["target.curvature_symmetries", "target.nonpositive_sectional", "target.christoffel_oracle",
             "target.riemann_oracle", "geometry.scalar_trace", "io.container_roundtrip"]
    client = _client(metric={"kind": "conformal", "phi": "0.1*sin(2*pi*x0)"},
                     target={"kind": "ball", "dim": 3, "K": -1.0},
                     initial_map={"kind": "constant"},
                     check={"only": names})
    results = run_checks(client)
    assert sorted(r.name for r in results) == sorted(names)
    assert all(r.passed for r in results)


def test_checks_are_reproducible():
    only = {"only": ["maps.adjointness", "energy.gradient_consistency", "grid.divergence_theorem"]}
    a = [r.value for r in run_checks(_client(check=only, seed=3))]
    b = [r.value for r in run_checks(_client(check=only, seed=3))]
    assert a == b


def test_unknown_check_is_a_config_error():
    with pytest.raises(ConfigError) as info:
        run_checks(_client(check={"only": ["grid.nope"]}))
    assert info.value.field == "check.only"


def test_failing_check_becomes_a_result(monkeypatch):
    def _boom(ctx):
        raise FieldError("bad lattice data")

    monkeypatch.setitem(suite.CHECKS, "test.boom", _boom)
    (res,) = run_checks(_client(check={"only": ["test.boom"]}))
    assert not res.passed
    assert math.isnan(res.value)
    assert "bad lattice data" in res.detail
    assert res.to_dict()["name"] == "test.boom"
    assert "FAIL" in res.row()


def test_structural_checks_are_registered():
    assert {"energy.conformal_invariance", "geometry.kappa_conformal_invariance", "geometry.round_sphere",
            "geometry.conformal_christoffels", "geometry.bianchi_decay", "flow.energy_identity"} <= set(CHECKS)


def test_round_sphere_and_invariance_checks():
    names = ["geometry.round_sphere", "energy.conformal_invariance", "flow.energy_identity"]
    client = _client(grid={"dims": [12, 12, 12, 12]},
                     metric={"kind": "conformal", "phi": "0.1*sin(2*pi*x0)"},
                     check={"only": names, "samples": 2})
    results = {r.name: r for r in run_checks(client)}
    assert results["geometry.round_sphere"].value < 0.25
    assert results["energy.conformal_invariance"].value < 2e-2
    assert results["flow.energy_identity"].value < 1e-2
    assert all(r.passed for r in results.values())
