import json

import numpy as np
import pytest

from _support import ROUND_TRIP_FAMILIES, parameter_error, random_generated
from martensite.compatibility import IncompatibleFieldError
from martensite.fields import Grid, GridField, Profile1D, sample_to_grid
from martensite.generators import build_austenite_example
from martensite.intervals import IntervalSet
from martensite.rigidity import ClassificationResult, classify

R = np.sqrt(2)
G = Grid(33)
# tol_fit ~ 5h is 0.31 at n = 33, above the smallest checkerboard weight; 65 separates the families
G_FIT = Grid(65)


@pytest.mark.parametrize("family", ROUND_TRIP_FAMILIES)
def test_round_trip_small_grid(family):
    rng = np.random.default_rng(21)
    for _ in range(3):
        spec, gen = random_generated(family, rng)
        res = classify(gen.theta(G_FIT))
        assert res.family == family
        assert parameter_error(spec, res) <= res.tol_fit
        assert res.residual <= res.tol_fit


def test_pure_variant_is_degenerate_two_variant():
    th = GridField(G, np.broadcast_to([0.0, 0.0, 1.0], G.shape + (3,)).copy())
    res = classify(th)
    assert res.family == "TwoVariant" and res.degenerate


def test_austenite_is_unclassified_with_nodes():
    steps = [Profile1D.indicator(IntervalSet(((c, R),)), domain=(-R, R)) for c in (0.1, -0.2, 0.05)]
    th, _ = build_austenite_example(*steps, Grid(17))
    res = classify(th)
    assert not res.classified
    inc = res.diagnostics["inclusion"]
    assert inc["nodes_outside_K"] > 0
    node = inc["example_nodes"][0]
    assert np.allclose(node["theta"], 1 / 3)
    assert node["dist_to_K"] > 0.1


def test_json_round_trip():
    rng = np.random.default_rng(3)
    _, gen = random_generated("Checkerboard", rng)
    res = classify(gen.theta(G))
    back = ClassificationResult.from_json(json.loads(res.dumps()))
    assert back.family == res.family and back.residual == res.residual
    assert json.loads(back.dumps()) == json.loads(res.dumps())


def test_gauge_invariance():
    rng = np.random.default_rng(12)
    spec, gen = random_generated("SecondOrderLaminate", rng)
    d = gen.decomposition
    moved = d.regauged("nu1+", 0.2, 0.1).regauged("nu3-", -0.4, 0.0)
    a = classify(sample_to_grid(d, G))
    b = classify(sample_to_grid(moved, G))
    assert a.family == b.family == "SecondOrderLaminate"
    assert abs(a.residual - b.residual) <= 1e-9
    assert parameter_error(spec, b) <= b.tol_fit


def test_incompatible_field_raises():
    x = G.points()
    # in K~ at every node but not a sum of profiles
    s = 0.5 + 0.4 * np.sin(3 * x[..., 0] * x[..., 1])
    th = GridField(G, np.stack([s, 1 - s, np.zeros(G.shape)], -1))
    with pytest.raises(IncompatibleFieldError) as e:
        classify(th)
    assert 1 <= e.value.equation <= 6


def test_rejects_wrong_shape():
    with pytest.raises(ValueError):
        classify(GridField(G, np.zeros(G.shape + (2,))))
