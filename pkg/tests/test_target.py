import numpy as np
import pytest

from cflow.exceptions import ChartError
from cflow.target.ball import HyperbolicBall
from cflow.target.oracles import apply_riemann, fd_christoffel, fd_riemann
from cflow.target.torus import FlatTorus
from cflow.utils.factory import TargetFactory


def _ball_points(rng, m, n, rmax=0.9):
    y = rng.normal(size=(m, n))
    r = rng.uniform(0.0, rmax, size=(m, 1))
    return r * y / np.linalg.norm(y, axis=-1, keepdims=True)


def test_constructors_validate():
    with pytest.raises(ValueError):
        HyperbolicBall(2, K=0.0)
    with pytest.raises(ValueError):
        FlatTorus(2, K=-1.0)
    with pytest.raises(ValueError):
        FlatTorus(2, periods=[1.0])


def test_factory_builds_charts():
    t = TargetFactory.create("torus", {"kind": "torus", "dim": 3, "periods": [1.0, 2.0, 3.0]})
    assert isinstance(t, FlatTorus)
    assert t.periods.tolist() == [1.0, 2.0, 3.0]

    b = TargetFactory.create("ball", {"kind": "ball", "dim": 2, "K": -4.0})
    assert isinstance(b, HyperbolicBall)
    assert b.K == -4.0

    with pytest.raises(ValueError):
        TargetFactory.create("sphere", {"kind": "torus", "dim": 1})


# --------------------------------------------------------------------------- #
#  metric_h / wrap                                                            #
# --------------------------------------------------------------------------- #
def test_metric_h_values():
    ball = HyperbolicBall(3, K=-1.0)
    assert np.allclose(ball.metric_h(np.zeros(3)), 4.0 * np.eye(3))
    assert np.allclose(ball.metric_h(np.array([0.5, 0.0, 0.0])), 4.0 / 0.75 ** 2 * np.eye(3))

    ball4 = HyperbolicBall(2, K=-4.0)
    assert np.allclose(ball4.metric_h(np.zeros(2)), np.eye(2))

    torus = FlatTorus(2)
    assert np.array_equal(torus.metric_h(np.array([0.3, 5.0])), np.eye(2))


def test_metric_h_outside_ball():
    ball = HyperbolicBall(2)
    with pytest.raises(ChartError):
        ball.metric_h(np.array([0.8, 0.8]))


def test_torus_wrap_and_min_image():
    torus = FlatTorus(2, periods=[1.0, 2.0])
    assert np.allclose(torus.wrap(np.array([1.25, -0.5])), [0.25, 1.5])
    assert np.allclose(torus.min_image(np.array([0.9, -1.9])), [-0.1, 0.1])


def test_ball_wrap_guard():
    ball = HyperbolicBall(2, guard=1e-3)
    y = np.array([0.3, 0.4])
    assert np.array_equal(ball.wrap(y), y)
    with pytest.raises(ChartError):
        ball.wrap(np.array([0.9995, 0.0]))
    with pytest.raises(ChartError):
        ball.wrap(np.array([np.nan, 0.0]))


# --------------------------------------------------------------------------- #
#  Connection and curvature against finite differences                        #
# --------------------------------------------------------------------------- #
@pytest.mark.parametrize("K", [-1.0, -0.25])
def test_ball_christoffels_match_oracle(K):
    ball = HyperbolicBall(3, K=K)
    rng = np.random.default_rng(1)
    for y in _ball_points(rng, 5, 3, rmax=0.7):
        exact = ball.christoffel_N(y)
        assert np.max(np.abs(exact - fd_christoffel(ball, y))) <= 1e-6 * (1 + np.max(np.abs(exact)))


def test_connection_matches_christoffel_contraction():
    ball = HyperbolicBall(4)
    rng = np.random.default_rng(2)
    y = _ball_points(rng, 7, 4)
    X, Y = rng.normal(size=y.shape), rng.normal(size=y.shape)
    full = np.einsum("...abc,...b,...c->...a", ball.christoffel_N(y), X, Y)
    assert np.allclose(ball.connection(y, X, Y), full, atol=1e-12)


@pytest.mark.parametrize("K", [-1.0, -2.0])
def test_ball_riemann_matches_oracle(K):
    ball = HyperbolicBall(3, K=K)
    rng = np.random.default_rng(3)
    y = np.array([0.2, -0.1, 0.3])
    X, Y, Z = (rng.normal(size=3) for _ in range(3))
    exact = ball.curv_op(y, X, Y, Z)
    fd = apply_riemann(fd_riemann(ball, y), X, Y, Z)
    assert np.max(np.abs(exact - fd)) <= 1e-5 * (1 + np.max(np.abs(exact)))


def test_sectional_curvature_is_K():
    ball = HyperbolicBall(3, K=-0.5)
    y = np.array([0.1, 0.2, -0.3])
    X, Z = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    sec = ball.inner(y, ball.curv_op(y, X, Z, Z), X)
    area = ball.inner(y, X, X) * ball.inner(y, Z, Z) - ball.inner(y, X, Z) ** 2
    assert sec / area == pytest.approx(-0.5, rel=1e-12)


@pytest.mark.parametrize("sf", [HyperbolicBall(3, K=-1.0), FlatTorus(3)])
def test_nonpositive_sectional_curvature(sf):
    rng = np.random.default_rng(4)
    y = _ball_points(rng, 1000, 3) if isinstance(sf, HyperbolicBall) else rng.uniform(size=(1000, 3))
    X, Z = rng.normal(size=y.shape), rng.normal(size=y.shape)
    sec = sf.inner(y, sf.curv_op(y, X, Z, Z), X)
    assert np.all(sec <= 1e-12 * (1 + np.abs(sec)))


def test_curvature_symmetries():
    ball = HyperbolicBall(4, K=-1.5)
    rng = np.random.default_rng(5)
    y = _ball_points(rng, 50, 4)
    X, Y, Z, W = (rng.normal(size=y.shape) for _ in range(4))
    rxy = ball.curv_op(y, X, Y, Z)
    assert np.allclose(rxy, -ball.curv_op(y, Y, X, Z), atol=1e-12)
    assert np.allclose(ball.inner(y, rxy, W), -ball.inner(y, ball.curv_op(y, X, Y, W), Z), rtol=1e-10, atol=1e-10)
